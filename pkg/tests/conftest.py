"""Shared fixtures: small deterministic cohorts and fitted models."""

from __future__ import annotations

import numpy as np
import pytest

from conjoint.model import FitConfig, fit_joint_model
from conjoint.synthetic import SyntheticConfig, generate_matrix


@pytest.fixture(scope="session")
def small_setup():
    """A 48-instance, 6-vertex cohort with its ground truth and fitted model."""
    config = SyntheticConfig(instances=48, vertices=6, seed=11)
    cohort, truth = generate_matrix(config)
    model = fit_joint_model(cohort.Y, cohort.specs, FitConfig(seed=5))
    return config, cohort, truth, model


@pytest.fixture(scope="session")
def small_cohort(small_setup):
    return small_setup[1]


@pytest.fixture(scope="session")
def small_model(small_setup):
    return small_setup[3]


@pytest.fixture(scope="session")
def default_cohort():
    """The default desk-scale cohort used by the reconstruction benchmark."""
    cohort, _ = generate_matrix(SyntheticConfig(instances=793))
    return cohort


def dense_covariance(latent):
    """Dense Sigma = U diag(lambda) U^T + delta I for oracle comparisons."""
    U, lam, delta = latent.basis, latent.eigenvalues, latent.jitter
    S = (U * lam) @ U.T
    S[np.diag_indices_from(S)] += delta
    return S
