"""Sampling tests: moment checks against exact posteriors, determinism."""

import numpy as np
import pytest

from conjoint.errors import InvalidInput
from conjoint.model import (
    PartialObservation,
    condition,
    sample,
    sample_latent,
    sample_latent_rows,
)
from test_conditioning import _bivariate_model

# two-sided 99.9% standard-normal quantile, for CLT bounds on sample means
Z_999 = 3.290526731


def test_unconditional_latent_moments():
    model = _bivariate_model(rho=0.8)
    n = 50_000
    X = sample_latent(model, n, rng=1)
    assert X.shape == (n, 2)
    bound = Z_999 / np.sqrt(n)
    assert np.all(np.abs(X.mean(axis=0)) < bound)
    C = np.cov(X.T)
    # sd of a unit-normal variance estimate is sqrt(2/n)
    vb = Z_999 * np.sqrt(2.0 / n)
    assert abs(C[0, 0] - 1.0) < vb
    assert abs(C[1, 1] - 1.0) < vb
    assert abs(C[0, 1] - 0.8) < vb


def test_conditional_latent_moments_match_posterior():
    model = _bivariate_model(rho=0.8)
    cond = condition(model, PartialObservation((0,), (1.0,), (0.0,)))
    n = 50_000
    X = sample_latent(cond, n, rng=2)
    np.testing.assert_allclose(X[:, 0], 1.0, atol=1e-10)
    var = 1.0 - 0.64
    assert abs(X[:, 1].mean() - 0.8) < Z_999 * np.sqrt(var / n)
    sd_var = var * np.sqrt(2.0 / n)
    assert abs(X[:, 1].var(ddof=1) - var) < Z_999 * sd_var


def test_conditional_moments_highdim(small_model, small_cohort):
    x = small_cohort.Y[:, 1]
    idx = (0, 7, 19)
    obs = PartialObservation(idx, tuple(float(x[i]) for i in idx), (0.0, 0.2, 0.0))
    cond = condition(small_model, obs)
    n = 20_000
    X = sample_latent(cond, n, rng=3)
    target_mean = cond.posterior_mean
    target_var = cond.diagonal()
    mean_bound = Z_999 * np.sqrt(np.maximum(target_var, 1e-12) / n)
    assert np.all(np.abs(X.mean(axis=0) - target_mean) < mean_bound + 1e-9)
    var_bound = Z_999 * np.maximum(target_var, 1e-9) * np.sqrt(2.0 / n)
    assert np.all(np.abs(X.var(axis=0, ddof=1) - target_var) < var_bound + 1e-9)


def test_all_components_observed_collapses_samples(small_model, small_cohort):
    d = small_model.dimension
    zhat = small_model.to_latent_vector(small_cohort.Y[:, 4])
    values = small_model.tables.inverse_matrix(zhat[:, None]).ravel()
    obs = PartialObservation(
        tuple(range(d)), tuple(float(v) for v in values), (0.0,) * d
    )
    cond = condition(small_model, obs)
    X = sample_latent(cond, 64, rng=4)
    np.testing.assert_allclose(X, np.tile(cond.posterior_mean, (64, 1)), atol=1e-8)


def test_sample_is_inverse_of_latent_sample(small_model):
    a = sample(small_model, 40, rng=np.random.default_rng(9))
    lat = sample_latent(small_model, 40, rng=np.random.default_rng(9))
    b = small_model.tables.inverse_matrix(lat.T).T
    np.testing.assert_array_equal(a, b)


def test_sampling_deterministic_in_seed(small_model):
    a = sample_latent(small_model, 10, rng=7)
    b = sample_latent(small_model, 10, rng=7)
    c = sample_latent(small_model, 10, rng=8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_restricted_sampler_moments(small_model, small_cohort):
    x = small_cohort.Y[:, 6]
    obs = PartialObservation((2, 11), (float(x[2]), float(x[11])), (0.0, 0.1))
    cond = condition(small_model, obs)
    rows = [2, 5, 11, 30]
    n = 20_000
    X = sample_latent_rows(cond, rows, n, rng=10)
    assert X.shape == (n, len(rows))
    target_mean = cond.posterior_mean[rows]
    target_var = cond.diagonal()[rows]
    mean_bound = Z_999 * np.sqrt(np.maximum(target_var, 1e-12) / n)
    assert np.all(np.abs(X.mean(axis=0) - target_mean) < mean_bound + 1e-9)
    var_bound = Z_999 * np.maximum(target_var, 1e-9) * np.sqrt(2.0 / n)
    assert np.all(np.abs(X.var(axis=0, ddof=1) - target_var) < var_bound + 1e-9)


def test_restricted_sampler_unconditional(small_model):
    rows = [0, 3]
    n = 20_000
    X = sample_latent_rows(small_model, rows, n, rng=11)
    target_var = small_model.latent.diagonal()[rows]
    assert np.all(
        np.abs(X.mean(axis=0) - small_model.latent.mean[rows])
        < Z_999 * np.sqrt(target_var / n)
    )


def test_restricted_sampler_validation(small_model):
    with pytest.raises(InvalidInput):
        sample_latent_rows(small_model, [], 5)
    with pytest.raises(InvalidInput):
        sample_latent_rows(small_model, [small_model.dimension], 5)
    with pytest.raises(InvalidInput):
        sample_latent_rows(small_model, [0], 0)
    with pytest.raises(InvalidInput):
        sample_latent(small_model, 0)


def test_samples_respect_marginal_levels(small_model):
    # non-continuous components may only take their declared levels
    X = sample(small_model, 200, rng=12)
    checked = 0
    for i, spec in enumerate(small_model.specs):
        if spec.kind.value in ("binary", "ordinal", "discrete"):
            levels = set(small_model.marginals[i].admissible_levels().tolist())
            assert set(np.unique(X[:, i])) <= levels
            checked += 1
    assert checked > 0
