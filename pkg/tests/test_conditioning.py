"""Conditioning tests: hand-computed bivariate oracle, dense differentials."""

import numpy as np
import pytest

from conftest import dense_covariance
from conjoint.errors import InvalidInput, InvalidLevel, InvalidMode, SingularConditioning
from conjoint.model import (
    FitConfig,
    JointModel,
    LatentGaussian,
    PartialObservation,
    condition,
    fit_joint_model,
    observation_from_values,
    predict,
    truncate_latent,
)
from conjoint.marginals import fit_marginal
from conjoint.specs import Block, Kind, MarginalKind, VariableSpec


def _gaussian_spec(name):
    return VariableSpec(
        name=name,
        kind=Kind.CONTINUOUS,
        block=Block.INDICATOR,
        marginal=MarginalKind.GAUSSIAN,
    )


def _unit_gaussian_marginal(spec):
    # sample mean 0 and ddof-1 std exactly 1, so the marginal is the identity
    return fit_marginal(np.array([-1.0, 0.0, 1.0]), spec)


def _bivariate_model(rho=0.8, jitter=0.0):
    """Exact 2-d standard-normal copula with correlation rho."""
    s = 1.0 / np.sqrt(2.0)
    basis = np.array([[s, s], [s, -s]])
    latent = LatentGaussian(
        mean=np.zeros(2),
        basis=basis,
        eigenvalues=np.array([1.0 + rho, 1.0 - rho]),
        jitter=jitter,
    )
    specs = (_gaussian_spec("a"), _gaussian_spec("b"))
    marginals = tuple(_unit_gaussian_marginal(s) for s in specs)
    return JointModel(specs=specs, marginals=marginals, latent=latent)


def test_bivariate_exact_posterior():
    model = _bivariate_model(rho=0.8)
    for z in (-1.3, 0.0, 0.4, 2.0):
        cond = condition(model, PartialObservation((0,), (z,), (0.0,)))
        assert cond.posterior_mean[0] == pytest.approx(z, abs=1e-12)
        assert cond.posterior_mean[1] == pytest.approx(0.8 * z, abs=1e-12)
        var = cond.diagonal()
        assert var[0] == pytest.approx(0.0, abs=1e-12)
        assert var[1] == pytest.approx(1.0 - 0.8**2, abs=1e-12)


def test_bivariate_posterior_with_observation_noise():
    model = _bivariate_model(rho=0.8)
    s = 0.5
    z = 1.2
    cond = condition(model, PartialObservation((0,), (z,), (s,)))
    shrink = 1.0 / (1.0 + s**2)
    assert cond.posterior_mean[0] == pytest.approx(z * shrink, abs=1e-12)
    assert cond.posterior_mean[1] == pytest.approx(0.8 * z * shrink, abs=1e-12)
    var = cond.diagonal()
    assert var[0] == pytest.approx(1.0 - shrink, abs=1e-12)
    assert var[1] == pytest.approx(1.0 - 0.64 * shrink, abs=1e-12)


def _random_observation(model, rng, q, sigma_scale=0.5):
    d = model.dimension
    idx = rng.choice(d, size=q, replace=False)
    x = model.sample(1, rng)[0]
    sig = rng.uniform(0.0, sigma_scale, size=q)
    return PartialObservation(
        tuple(int(i) for i in idx),
        tuple(float(x[i]) for i in idx),
        tuple(float(s) for s in sig),
    )


def _dense_posterior(model, obs):
    """Textbook Gaussian conditioning on the dense covariance."""
    S = dense_covariance(model.latent)
    idx = obs.index_array()
    zhat = np.array(
        [model.marginals[i].forward(v) for i, v in zip(idx, obs.values)]
    )
    A = S[np.ix_(idx, idx)] + np.diag(obs.sigma_array() ** 2)
    K = np.linalg.solve(A, S[idx, :]).T
    mu = model.latent.mean
    mean_c = mu + K @ (zhat - mu[idx])
    cov_c = S - K @ S[idx, :]
    return mean_c, cov_c


def test_lowrank_matches_dense_oracle(small_model):
    rng = np.random.default_rng(77)
    for trial in range(10):
        q = int(rng.integers(1, 11))
        obs = _random_observation(small_model, rng, q)
        cond = condition(small_model, obs)
        mean_o, cov_o = _dense_posterior(small_model, obs)
        np.testing.assert_allclose(cond.posterior_mean, mean_o, atol=1e-8)
        np.testing.assert_allclose(cond.covariance(), cov_o, atol=1e-8)
        np.testing.assert_allclose(cond.diagonal(), np.diag(cov_o), atol=1e-8)


def test_variance_never_exceeds_prior(small_model):
    rng = np.random.default_rng(5)
    prior_diag = small_model.latent.diagonal()
    for trial in range(5):
        obs = _random_observation(small_model, rng, 6)
        post = condition(small_model, obs).diagonal()
        assert np.all(post <= prior_diag + 1e-10)
        assert np.all(post >= 0.0)


def test_variance_monotone_under_nested_observations(small_model, small_cohort):
    rng = np.random.default_rng(123)
    x = small_cohort.Y[:, 0]
    for trial in range(5):
        order = rng.permutation(small_model.dimension)[:12]
        prev = small_model.latent.diagonal()
        for k in range(1, 13, 3):
            idx = order[:k]
            obs = PartialObservation(
                tuple(int(i) for i in idx),
                tuple(float(x[i]) for i in idx),
                (0.0,) * k,
            )
            cur = condition(small_model, obs).diagonal()
            assert np.all(cur <= prev + 1e-10)
            prev = cur


def test_posterior_covariance_is_psd(small_model):
    rng = np.random.default_rng(31)
    obs = _random_observation(small_model, rng, 8)
    w = np.linalg.eigvalsh(condition(small_model, obs).covariance())
    assert w.min() >= -1e-10


def test_modes_satisfy_eigen_equation(small_model):
    rng = np.random.default_rng(13)
    obs = _random_observation(small_model, rng, 5)
    cond = condition(small_model, obs)
    S = cond.covariance()
    variances, basis = cond.top_modes(6)
    assert np.all(np.diff(variances) <= 1e-12)
    np.testing.assert_allclose(basis.T @ basis, np.eye(6), atol=1e-8)
    np.testing.assert_allclose(S @ basis, basis * variances, atol=1e-8)
    # the in-span spectrum matches the dense one; everything beyond is jitter
    dense_w = np.sort(np.linalg.eigvalsh(S))[::-1]
    mv = cond.mode_variances()
    np.testing.assert_allclose(mv, dense_w[: mv.size], atol=1e-8)
    if mv.size < S.shape[0]:
        np.testing.assert_allclose(
            dense_w[mv.size :], small_model.latent.jitter, atol=1e-8
        )
    np.testing.assert_allclose(cond.mode_variances()[:6], variances, atol=1e-12)


def test_mode_instance_traverses_posterior_mode(small_model):
    rng = np.random.default_rng(17)
    obs = _random_observation(small_model, rng, 4)
    cond = condition(small_model, obs)
    center = cond.mode_instance(1, 0.0)
    np.testing.assert_allclose(center, cond.posterior_instance(), atol=1e-12)
    variances, basis = cond.top_modes(2)
    x = cond.posterior_mean + 1.5 * np.sqrt(variances[1]) * basis[:, 1]
    np.testing.assert_allclose(
        cond.mode_instance(2, 1.5), small_model.from_latent_vector(x), atol=1e-12
    )


def test_prior_mode_instance_linear_in_latent(small_model):
    latent = small_model.latent
    for k, t in ((1, 1.0), (2, -2.0), (3, 0.5)):
        x = latent.mean + t * np.sqrt(latent.eigenvalues[k - 1]) * latent.basis[:, k - 1]
        np.testing.assert_allclose(
            small_model.mode_instance(k, t),
            small_model.from_latent_vector(x),
            atol=1e-12,
        )


def test_mode_index_validation(small_model):
    rng = np.random.default_rng(19)
    obs = _random_observation(small_model, rng, 3)
    cond = condition(small_model, obs)
    with pytest.raises(InvalidMode):
        cond.top_modes(0)
    with pytest.raises(InvalidMode):
        cond.top_modes(cond.rank + 1)
    with pytest.raises(InvalidMode):
        cond.mode_instance(cond.rank + 1, 0.0)
    with pytest.raises(InvalidInput):
        cond.mode_instance(1, np.nan)


def test_predict_equals_conditional_posterior_instance(small_model, small_cohort):
    x = small_cohort.Y[:, 3]
    obs = PartialObservation((0, 5, 30), (x[0], x[5], x[30]), (0.0, 0.1, 0.0))
    np.testing.assert_array_equal(
        predict(small_model, obs), condition(small_model, obs).posterior_instance()
    )
    baseline = predict(small_model)
    np.testing.assert_allclose(
        baseline, small_model.from_latent_vector(small_model.latent.mean), atol=0
    )


def test_exact_observation_reproduced(small_model, small_cohort):
    # continuous components observed with sigma 0 come back unchanged
    names = [s.name for s in small_model.specs]
    i = names.index("age")
    value = float(small_cohort.Y[i, 7])
    cond = condition(small_model, PartialObservation((i,), (value,), (0.0,)))
    assert cond.posterior_instance()[i] == pytest.approx(value, abs=1e-9)
    assert cond.diagonal()[i] <= small_model.latent.jitter + 1e-10


def test_observation_from_values_sigma_routing(small_model):
    obs = observation_from_values(
        small_model,
        {"age": 70.0, "volume": 3.0},
        sigma=0.3,
        block_sigma={"indicator": 0.05},
    )
    by_name = {small_model.specs[i].name: s for i, s in zip(obs.indices, obs.sigmas)}
    assert by_name["age"] == 0.05  # block override beats the scalar default
    assert by_name["volume"] == 0.05
    obs2 = observation_from_values(small_model, {"age": 70.0}, sigma={"age": 0.7})
    assert obs2.sigmas == (0.7,)
    with pytest.raises(InvalidInput):
        observation_from_values(small_model, {})
    with pytest.raises(InvalidLevel):
        observation_from_values(small_model, {"no_such": 1.0})


def test_observation_validation():
    with pytest.raises(InvalidInput):
        PartialObservation((0, 0), (1.0, 2.0), (0.0, 0.0))  # duplicate index
    with pytest.raises(InvalidInput):
        PartialObservation((-1,), (1.0,), (0.0,))
    with pytest.raises(InvalidInput):
        PartialObservation((0,), (np.nan,), (0.0,))
    with pytest.raises(InvalidInput):
        PartialObservation((0,), (1.0,), (-0.1,))


def test_condition_input_validation(small_model):
    with pytest.raises(InvalidInput):
        condition(small_model, PartialObservation((), (), ()))
    d = small_model.dimension
    with pytest.raises(InvalidInput):
        condition(small_model, PartialObservation((d,), (0.0,), (0.0,)))


def test_singular_conditioning_raises():
    s = 1.0 / np.sqrt(2.0)
    latent = LatentGaussian(
        mean=np.zeros(2),
        basis=np.array([[s], [s]]),
        eigenvalues=np.array([1.0]),
        jitter=0.0,
    )
    specs = (_gaussian_spec("a"), _gaussian_spec("b"))
    marginals = tuple(_unit_gaussian_marginal(sp) for sp in specs)
    model = JointModel(specs=specs, marginals=marginals, latent=latent)
    with pytest.raises(SingularConditioning):
        condition(model, PartialObservation((0, 1), (1.0, 1.0), (0.0, 0.0)))
    # observation noise regularizes the same system
    cond = condition(model, PartialObservation((0, 1), (1.0, 1.0), (0.1, 0.1)))
    assert np.all(np.isfinite(cond.posterior_mean))


def test_truncated_model_still_conditions(small_model, small_cohort):
    latent = truncate_latent(small_model.latent, 5)
    trunc = JointModel(
        specs=small_model.specs, marginals=small_model.marginals, latent=latent
    )
    x = small_cohort.Y[:, 2]
    obs = PartialObservation((1, 8), (float(x[1]), float(x[8])), (0.0, 0.0))
    cond = condition(trunc, obs)
    mean_o, cov_o = _dense_posterior(trunc, obs)
    np.testing.assert_allclose(cond.posterior_mean, mean_o, atol=1e-8)
    np.testing.assert_allclose(cond.diagonal(), np.diag(cov_o), atol=1e-8)
