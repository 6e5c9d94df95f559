"""Tie-randomized normal-scores transform of the training matrix.

Empirical-marginal rows are replaced by ndtri(rank / (M+1)) where tied values
receive a random permutation of the ranks they jointly occupy; the permutation
is a deterministic function of (seed, ranking_index). Rows without ties are
identical across rankings, constant rows map to latent zero, and
gaussian-marginal rows are standardized through their fitted parameters (the
parametric CDF replaces ranks for them).
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .errors import InvalidInput
from .marginals import GaussianMarginal, MarginalModel

_MASK63 = (1 << 63) - 1


def _rng(seed: int, ranking_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & _MASK63, int(ranking_index)])


def classify_rows(Y: np.ndarray, marginals: Sequence[MarginalModel]) -> dict[str, np.ndarray]:
    """Index sets: gaussian rows, empirical untied/tied rows, constant rows.

    A constant row is degenerate: its marginal sends the single value to
    latent 0, so it contributes zero covariance rather than an artificial
    full-spread ranking.
    """
    gaussian, untied, tied, constant = [], [], [], []
    for i, m in enumerate(marginals):
        if isinstance(m.variant, GaussianMarginal):
            gaussian.append(i)
            continue
        row = np.sort(Y[i])
        if row[0] == row[-1]:
            constant.append(i)
        elif np.any(row[1:] == row[:-1]):
            tied.append(i)
        else:
            untied.append(i)
    return {
        "gaussian": np.asarray(gaussian, dtype=np.intp),
        "untied": np.asarray(untied, dtype=np.intp),
        "tied": np.asarray(tied, dtype=np.intp),
        "constant": np.asarray(constant, dtype=np.intp),
    }


def _unique_ranks(rows: np.ndarray) -> np.ndarray:
    """Ranks 1..M per row; rows must have no tied values."""
    order = np.argsort(rows, axis=1)
    ranks = np.empty(rows.shape, dtype=np.float64)
    np.put_along_axis(ranks, order, np.arange(1, rows.shape[1] + 1, dtype=np.float64), axis=1)
    return ranks


def tie_broken_scores(rows: np.ndarray, seed: int, ranking_index: int) -> np.ndarray:
    """Normal scores for rows with ties, under ranking ``ranking_index``.

    Each row's tied values receive a uniformly random permutation of the ranks
    their plateau occupies. One uniform matrix is drawn per call, so the result
    depends only on (row content, row order, seed, ranking_index).
    """
    rows = np.asarray(rows, dtype=np.float64)
    k, m = rows.shape
    rng = _rng(seed, ranking_index)
    perm = np.argsort(rng.random((k, m)), axis=1)  # uniform permutation per row
    shuffled = np.take_along_axis(rows, perm, axis=1)
    order = np.argsort(shuffled, axis=1, kind="stable")
    ranks_shuffled = np.empty((k, m), dtype=np.float64)
    np.put_along_axis(
        ranks_shuffled, order, np.arange(1, m + 1, dtype=np.float64), axis=1
    )
    ranks = np.empty((k, m), dtype=np.float64)
    np.put_along_axis(ranks, perm, ranks_shuffled, axis=1)
    return ndtri(ranks / (m + 1))


def build_latent_matrix(
    Y: np.ndarray,
    marginals: Sequence[MarginalModel],
    seed: int = 0,
    ranking_index: int = 0,
) -> np.ndarray:
    """Latent training matrix for one tie-broken ranking.

    Parameters
    ----------
    Y : ndarray, shape (d, M)
        Training data, one row per component.
    marginals : sequence of MarginalModel
        Fitted marginals for Y's rows.
    seed, ranking_index : int
        Determine the tie-breaking permutations; rows without ties do not
        consume randomness and are identical for every ranking_index.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise InvalidInput("Y must be a (d, M) matrix")
    d, m = Y.shape
    if len(marginals) != d:
        raise InvalidInput(f"{len(marginals)} marginals for {d} rows")
    rows = classify_rows(Y, marginals)
    X = np.empty_like(Y)
    g = rows["gaussian"]
    if g.size:
        means = np.array([marginals[i].variant.mean for i in g])
        stds = np.array([marginals[i].variant.stddev for i in g])
        X[g] = (Y[g] - means[:, None]) / stds[:, None]
    u = rows["untied"]
    if u.size:
        X[u] = ndtri(_unique_ranks(Y[u]) / (m + 1))
    t = rows["tied"]
    if t.size:
        X[t] = tie_broken_scores(Y[t], seed, ranking_index)
    c = rows["constant"]
    if c.size:
        X[c] = 0.0
    return X
