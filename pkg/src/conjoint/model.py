"""Joint latent-Gaussian model: fitting, conditioning, prediction, sampling.

The joint distribution over mixed-type components is a Gaussian copula: each
component is mapped through its marginal to a standard-normal latent variable,
and the latent vector carries a low-rank-plus-jitter Gaussian

    Sigma = U diag(lambda) U^T + delta I,   U orthonormal (d x r).

Fitting averages the latent sample covariance over T tie-broken rankings and
eigendecomposes the average once, in factored form (never materializing a
large dense covariance). Conditioning on q observed components solves a q x q
system; the posterior covariance is kept as the factored pair
(prior, C = B L^{-T}) with Sigma_c = Sigma - C C^T, and its eigenbasis is
recovered exactly inside span([U, Q2]) where Q2 spans the observed coordinate
directions orthogonal to U. Conditional sampling uses Matheron's rule, so no
posterior factorization is needed to draw samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np
import scipy.linalg

from .errors import (
    InvalidInput,
    InvalidLevel,
    InvalidMode,
    InvalidRank,
    InvalidTask,
    LayoutMismatch,
    SingularConditioning,
)
from .marginals import MarginalModel, TransformTables, fit_marginal
from .ranking import build_latent_matrix, classify_rows, tie_broken_scores
from .specs import Block, VariableSpec, check_unique_names

__all__ = [
    "FitConfig",
    "LatentGaussian",
    "JointModel",
    "PartialObservation",
    "ConditionalModel",
    "CrossValidationResult",
    "fit_joint_model",
    "truncate_latent",
    "condition",
    "predict",
    "sample",
    "sample_latent",
    "sample_latent_rows",
    "principal_mode_instance",
    "posterior_mean_matrix",
    "cross_validate_sigma",
    "observation_from_values",
]


def _as_vector(a, name: str) -> np.ndarray:
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise InvalidInput(f"{name} must be one-dimensional")
    return v


def _check_orthonormal(basis: np.ndarray) -> None:
    d, r = basis.shape
    if r == 0:
        return
    norms = np.einsum("ij,ij->j", basis, basis)
    if not np.allclose(norms, 1.0, atol=1e-8):
        raise InvalidInput("basis columns are not unit length")
    if d * r * r <= 500_000_000:  # full Gram only when affordable
        gram = basis.T @ basis
        if not np.allclose(gram, np.eye(r), atol=1e-8):
            raise InvalidInput("basis columns are not orthonormal")
    elif r > 1:
        adj = np.einsum("ij,ij->j", basis[:, :-1], basis[:, 1:])
        if not np.allclose(adj, 0.0, atol=1e-8):
            raise InvalidInput("basis columns are not orthonormal")


@dataclass(frozen=True, eq=False)
class LatentGaussian:
    """Latent-space Gaussian N(mean, U diag(eigenvalues) U^T + jitter I).

    Parameters
    ----------
    mean : ndarray, shape (d,)
    basis : ndarray, shape (d, r)
        Orthonormal eigenvector columns, leading modes first.
    eigenvalues : ndarray, shape (r,)
        Non-negative, non-increasing.
    jitter : float
        Isotropic floor delta >= 0 added to the diagonal.
    """

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    jitter: float = 1e-6

    def __post_init__(self):
        # private copies: the fields are frozen read-only and must not alias
        # caller arrays
        mean = np.array(_as_vector(self.mean, "mean"))
        basis = np.array(np.asarray(self.basis, dtype=np.float64))
        lam = np.array(_as_vector(self.eigenvalues, "eigenvalues"))
        if basis.ndim != 2:
            raise InvalidInput("basis must be a (d, r) matrix")
        if basis.shape[0] != mean.size:
            raise LayoutMismatch(
                f"basis has {basis.shape[0]} rows for a {mean.size}-dimensional mean"
            )
        if basis.shape[1] != lam.size:
            raise LayoutMismatch(
                f"{lam.size} eigenvalues for {basis.shape[1]} basis columns"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(basis)) and np.all(np.isfinite(lam))):
            raise InvalidInput("latent parameters contain non-finite values")
        if np.any(lam < 0):
            raise InvalidInput("eigenvalues must be non-negative")
        if np.any(lam[1:] > lam[:-1] + 1e-12):
            raise InvalidInput("eigenvalues must be non-increasing")
        jitter = float(self.jitter)
        if not (np.isfinite(jitter) and jitter >= 0):
            raise InvalidInput("jitter must be finite and non-negative")
        _check_orthonormal(basis)
        for name, arr in (("mean", mean), ("basis", basis), ("eigenvalues", lam)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "jitter", jitter)

    @property
    def dimension(self) -> int:
        return self.mean.size

    @property
    def rank(self) -> int:
        return self.eigenvalues.size

    def covariance(self) -> np.ndarray:
        """Dense d x d covariance (intended for small d / verification)."""
        U = self.basis
        S = (U * self.eigenvalues) @ U.T
        S[np.diag_indices_from(S)] += self.jitter
        return S

    def diagonal(self) -> np.ndarray:
        """diag(Sigma) without materializing Sigma."""
        return self.jitter + (self.basis**2) @ self.eigenvalues


@dataclass(frozen=True)
class FitConfig:
    """Fitting hyperparameters.

    rankings is the number T of tie-broken rankings averaged; rank defaults
    to M - 1 when None; jitter is the isotropic diagonal floor.
    """

    rankings: int = 50
    seed: int = 0
    rank: int | None = None
    jitter: float = 1e-6


@dataclass(frozen=True, eq=False)
class JointModel:
    """A fitted joint model: specs, marginals, latent Gaussian, layout."""

    specs: tuple[VariableSpec, ...]
    marginals: tuple[MarginalModel, ...]
    latent: LatentGaussian
    layout: "InstanceLayout | None" = None
    metadata: Mapping[str, object] = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        specs = tuple(self.specs)
        marginals = tuple(self.marginals)
        check_unique_names(specs)
        d = self.latent.dimension
        if len(specs) != d or len(marginals) != d:
            raise LayoutMismatch(
                f"{len(specs)} specs / {len(marginals)} marginals for latent dimension {d}"
            )
        for s, m in zip(specs, marginals):
            if m.spec.name != s.name:
                raise LayoutMismatch(f"marginal order mismatch at {s.name!r}")
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "marginals", marginals)
        object.__setattr__(self, "metadata", dict(self.metadata))

    # -- lookups -----------------------------------------------------------

    @property
    def dimension(self) -> int:
        return self.latent.dimension

    @property
    def rank(self) -> int:
        return self.latent.rank

    @property
    def names(self) -> tuple[str, ...]:
        if "names" not in self._cache:
            self._cache["names"] = tuple(s.name for s in self.specs)
        return self._cache["names"]

    def index_of(self, name: str) -> int:
        """Component index for a variable name (unknown name -> InvalidLevel)."""
        if "index" not in self._cache:
            self._cache["index"] = {s.name: i for i, s in enumerate(self.specs)}
        try:
            return self._cache["index"][name]
        except KeyError:
            raise InvalidLevel(f"unknown variable {name!r}") from None

    @property
    def tables(self) -> TransformTables:
        if "tables" not in self._cache:
            self._cache["tables"] = TransformTables(self.marginals)
        return self._cache["tables"]

    # -- vector transforms -------------------------------------------------

    def to_latent_vector(self, values: np.ndarray) -> np.ndarray:
        v = _as_vector(values, "values")
        if v.size != self.dimension:
            raise LayoutMismatch(f"expected {self.dimension} values, got {v.size}")
        return self.tables.forward_matrix(v[:, None]).ravel()

    def from_latent_vector(self, x: np.ndarray) -> np.ndarray:
        v = _as_vector(x, "latent vector")
        if v.size != self.dimension:
            raise LayoutMismatch(f"expected {self.dimension} values, got {v.size}")
        return self.tables.inverse_matrix(v[:, None]).ravel()

    # -- conveniences (module functions do the work) -------------------------

    def condition(self, obs: "PartialObservation") -> "ConditionalModel":
        return condition(self, obs)

    def predict(self, obs: "PartialObservation | None" = None) -> np.ndarray:
        return predict(self, obs)

    def sample(self, n: int, rng=None) -> np.ndarray:
        return sample(self, n, rng)

    def mode_instance(self, k: int, t: float) -> np.ndarray:
        return principal_mode_instance(self, k, t)


@dataclass(frozen=True)
class PartialObservation:
    """Observed components: (index, value, sigma) triples.

    sigma is the per-entry observation noise standard deviation on the latent
    scale; 0 means the component is observed exactly.
    """

    indices: tuple[int, ...]
    values: tuple[float, ...]
    sigmas: tuple[float, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        val = tuple(float(v) for v in self.values)
        sig = tuple(float(s) for s in self.sigmas)
        if not (len(idx) == len(val) == len(sig)):
            raise InvalidInput("indices, values and sigmas must have equal length")
        if len(set(idx)) != len(idx):
            raise InvalidInput("duplicate component index in observation")
        if any(i < 0 for i in idx):
            raise InvalidInput("negative component index in observation")
        if not all(np.isfinite(val)):
            raise InvalidInput("observation contains a non-finite value")
        if not all(np.isfinite(s) and s >= 0 for s in sig):
            raise InvalidInput("observation sigmas must be finite and >= 0")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "sigmas", sig)

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[int, float, float]]) -> "PartialObservation":
        items = list(triples)
        return cls(
            indices=tuple(t[0] for t in items),
            values=tuple(t[1] for t in items),
            sigmas=tuple(t[2] if len(t) > 2 else 0.0 for t in items),
        )

    def __len__(self) -> int:
        return len(self.indices)

    def index_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.intp)

    def value_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def sigma_array(self) -> np.ndarray:
        return np.asarray(self.sigmas, dtype=np.float64)


def observation_from_values(
    model: JointModel,
    assignments: Mapping[str, float],
    sigma: float | Mapping[str, float] = 0.0,
    block_sigma: Mapping[str, float] | None = None,
) -> PartialObservation:
    """Build a PartialObservation from name -> value assignments.

    sigma may be a scalar default or a per-name mapping; block_sigma, when
    given, overrides the scalar default for every name in that block.
    """
    if not assignments:
        raise InvalidInput("empty observation")
    triples = []
    for name, value in assignments.items():
        i = model.index_of(name)
        block = model.specs[i].block.value
        if isinstance(sigma, Mapping) and name in sigma:
            s = float(sigma[name])
        elif block_sigma is not None and block in block_sigma:
            s = float(block_sigma[block])
        elif isinstance(sigma, Mapping):
            s = 0.0
        else:
            s = float(sigma)
        triples.append((i, float(value), s))
    return PartialObservation.from_triples(triples)


# ---------------------------------------------------------------------------
# fitting


def _averaged_covariance_eigh(
    Y: np.ndarray,
    marginals: Sequence[MarginalModel],
    rankings: int,
    seed: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Eigendecomposition of the ranking-averaged latent covariance.

    Returns (mean, eigenvalues desc, eigenvectors) without ever forming the
    d x d covariance when d is large: every tie-broken latent matrix differs
    from the first one only in tied rows, so all T centered matrices live in
    span([C_0, P_tied]) and the averaged covariance can be eigendecomposed
    exactly inside that subspace.
    """
    d, m = Y.shape
    scale = 1.0 / np.sqrt(m - 1)
    S0 = build_latent_matrix(Y, marginals, seed, 0)
    mu = S0.mean(axis=1)
    C0 = (S0 - mu[:, None]) * scale
    tied = classify_rows(Y, marginals)["tied"]
    n_tied = int(tied.size)

    def centered_tied(t: int) -> np.ndarray:
        Z = tie_broken_scores(Y[tied], seed, t)
        return (Z - mu[tied, None]) * scale

    span = m + n_tied
    if d <= max(span, 256):
        # dense path: accumulate the averaged covariance blockwise
        if n_tied == 0:
            R = C0 @ C0.T
        else:
            fixed = np.setdiff1d(np.arange(d), tied)
            F = C0[fixed]
            z_sum = np.zeros((n_tied, m))
            gram = np.zeros((n_tied, n_tied))
            z0 = C0[tied]
            z_sum += z0
            gram += z0 @ z0.T
            for t in range(1, rankings):
                zt = centered_tied(t)
                z_sum += zt
                gram += zt @ zt.T
            z_bar = z_sum / rankings
            R = np.empty((d, d))
            R[np.ix_(fixed, fixed)] = F @ F.T
            cross = F @ z_bar.T
            R[np.ix_(fixed, tied)] = cross
            R[np.ix_(tied, fixed)] = cross.T
            R[np.ix_(tied, tied)] = gram / rankings
        w, V = np.linalg.eigh(R)
    else:
        # subspace path: exact eigendecomposition inside span([C0, P_tied])
        if n_tied == 0:
            B = C0
        else:
            P = np.zeros((d, n_tied))
            P[tied, np.arange(n_tied)] = 1.0
            B = np.hstack([C0, P])
        Q, _ = scipy.linalg.qr(B, mode="economic")
        QtC0 = Q.T @ C0
        if n_tied == 0:
            A = QtC0 @ QtC0.T
        else:
            QtP = Q[tied].T
            z0 = C0[tied]
            A = np.zeros((Q.shape[1], Q.shape[1]))
            for t in range(rankings):
                zt = z0 if t == 0 else centered_tied(t)
                W = QtC0 + QtP @ (zt - z0)
                A += W @ W.T
            A /= rankings
        w, Vs = np.linalg.eigh(A)
        V = Q @ Vs
    order = np.argsort(w)[::-1]
    return mu, np.maximum(w[order], 0.0), V[:, order]


def _fix_signs(U: np.ndarray) -> np.ndarray:
    """Deterministic eigenvector orientation: largest-|entry| made positive."""
    if U.size == 0:
        return U
    anchor = np.abs(U).argmax(axis=0)
    signs = np.sign(U[anchor, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def fit_joint_model(
    Y: np.ndarray,
    specs: Sequence[VariableSpec],
    config: FitConfig | None = None,
) -> JointModel:
    """Fit marginals and the latent Gaussian on a (d, M) training matrix.

    The latent covariance is the average, over ``config.rankings`` tie-broken
    rankings, of the latent sample covariance (normalized by M - 1); its top
    ``config.rank`` eigenpairs (default M - 1) plus the diagonal floor define
    the model. When the rank cuts off nonzero eigenvalues, their mean is
    absorbed into the floor and subtracted from the kept eigenvalues
    (probabilistic-PCA style), so truncation trades resolution for a higher
    noise floor instead of silently discarding variance.

    Raises
    ------
    InvalidInput
        Non-finite input, fewer than 3 instances, or spec/row count mismatch.
    InvalidRank
        Requested rank exceeds M - 1 or is below 1.
    """
    config = config or FitConfig()
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise InvalidInput("Y must be a (d, M) matrix")
    d, m = Y.shape
    if d < 1:
        raise InvalidInput("Y must have at least one row")
    if m < 3:
        raise InvalidInput(f"need at least 3 training instances, got {m}")
    if not np.all(np.isfinite(Y)):
        raise InvalidInput("training matrix contains non-finite values")
    specs = tuple(specs)
    if len(specs) != d:
        raise LayoutMismatch(f"{len(specs)} specs for {d} rows")
    if config.rankings < 1:
        raise InvalidInput("rankings must be >= 1")
    if not (np.isfinite(config.jitter) and config.jitter >= 0):
        raise InvalidInput("jitter must be finite and >= 0")
    rank = m - 1 if config.rank is None else int(config.rank)
    if rank > m - 1:
        raise InvalidRank(f"rank {rank} exceeds M-1 = {m - 1}")
    if rank < 1:
        raise InvalidRank(f"rank must be >= 1, got {rank}")

    marginals = tuple(fit_marginal(Y[i], s) for i, s in enumerate(specs))
    mu, w, V = _averaged_covariance_eigh(Y, marginals, config.rankings, config.seed)
    r_eff = min(rank, w.size)
    # truncation absorbs the discarded variance into the isotropic floor
    # (probabilistic-PCA maximum likelihood); kept eigenvalues shrink by the
    # same amount so per-direction totals are preserved
    absorbed = 0.0
    if d > r_eff:
        absorbed = float(w[r_eff:].sum()) / (d - r_eff)
    latent = LatentGaussian(
        mean=mu,
        basis=_fix_signs(V[:, :r_eff]),
        eigenvalues=np.maximum(w[:r_eff] - absorbed, 0.0),
        jitter=config.jitter + absorbed,
    )
    from .meshdata import derive_layout  # local import: keeps the modules decoupled

    return JointModel(
        specs=specs,
        marginals=marginals,
        latent=latent,
        layout=derive_layout(specs),
        metadata={
            "training_size": m,
            "ranking_count": int(config.rankings),
            "seed": int(config.seed),
            "requested_rank": rank,
        },
    )


def truncate_latent(latent: LatentGaussian, rank: int) -> LatentGaussian:
    """Rank-truncate a latent Gaussian, absorbing the discarded variance.

    Keeps the leading ``rank`` eigenpairs; the mean of the discarded
    eigenvalues (spread over all trailing directions) moves into the
    isotropic floor and is subtracted from the kept eigenvalues, matching
    the truncation rule used by the fit.

    Raises
    ------
    InvalidRank
        ``rank`` outside [1, latent.rank].
    """
    r = latent.rank
    if not 1 <= int(rank) <= r:
        raise InvalidRank(f"rank must be in [1, {r}], got {rank}")
    rank = int(rank)
    if rank == r:
        return latent
    d = latent.basis.shape[0]
    absorbed = 0.0
    if d > rank:
        absorbed = float(latent.eigenvalues[rank:].sum()) / (d - rank)
    return LatentGaussian(
        mean=latent.mean,
        basis=latent.basis[:, :rank],
        eigenvalues=np.maximum(latent.eigenvalues[:rank] - absorbed, 0.0),
        jitter=latent.jitter + absorbed,
    )


# ---------------------------------------------------------------------------
# conditioning


def _conditioner(
    latent: LatentGaussian, idx: np.ndarray, sigmas: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Cholesky factor L of A = P Sigma P^T + diag(sigma^2) and B = Sigma P^T."""
    U, lam, delta = latent.basis, latent.eigenvalues, latent.jitter
    q = idx.size
    Uz = U[idx]
    A = (Uz * lam) @ Uz.T
    A[np.diag_indices(q)] += sigmas**2 + delta
    try:
        L = scipy.linalg.cholesky(A, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SingularConditioning(
            "observation system is singular; refit with jitter > 0 "
            "or observe with sigma > 0"
        ) from exc
    B = (U * lam) @ Uz.T
    B[idx, np.arange(q)] += delta
    return L, B


def posterior_mean_matrix(
    model: JointModel,
    indices: np.ndarray,
    sigmas: np.ndarray,
    latent_observations: np.ndarray,
) -> np.ndarray:
    """Posterior latent means for many observation vectors sharing one index set.

    latent_observations has shape (q, n): column j holds the latent values of
    the observed components for instance j. Factorizes the q x q system once.
    Returns the (d, n) posterior mean matrix.
    """
    idx = np.asarray(indices, dtype=np.intp)
    Z = np.asarray(latent_observations, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != idx.size:
        raise InvalidInput("latent_observations must have shape (q, n)")
    L, B = _conditioner(model.latent, idx, np.asarray(sigmas, dtype=np.float64))
    mu = model.latent.mean
    alpha = scipy.linalg.cho_solve((L, True), Z - mu[idx, None])
    return mu[:, None] + B @ alpha


def condition(model: JointModel, obs: PartialObservation) -> ConditionalModel:
    """Condition the latent Gaussian on observed components.

    Observed values are mapped to the latent scale through their marginals;
    each entry's sigma adds sigma^2 to the corresponding diagonal of the
    observation system. Solves one q x q system (q = number of observed
    components); no dense d x d matrix is formed.
    """
    if len(obs) == 0:
        raise InvalidInput("empty observation")
    d = model.dimension
    idx = obs.index_array()
    if np.any(idx >= d):
        raise InvalidInput(f"component index out of range for dimension {d}")
    zhat = np.array(
        [model.marginals[i].forward(v) for i, v in zip(idx, obs.values)]
    )
    sig = obs.sigma_array()
    L, B = _conditioner(model.latent, idx, sig)
    alpha = scipy.linalg.cho_solve((L, True), zhat - model.latent.mean[idx])
    mean_c = model.latent.mean + B @ alpha
    return ConditionalModel(model, idx, zhat, sig, mean_c, L, B)


class ConditionalModel:
    """Posterior latent Gaussian after conditioning; immutable.

    The covariance is held in factored form Sigma_c = Sigma - C C^T with
    C = B L^{-T}; diagonals, dense reconstruction, eigenmodes and samples are
    all derived from that factorization.
    """

    def __init__(self, prior, indices, latent_values, sigmas, posterior_mean, L, B):
        self.prior: JointModel = prior
        self.indices = indices
        self.latent_values = latent_values
        self.sigmas = sigmas
        self.posterior_mean = posterior_mean
        self._L = L
        self._B = B
        self._C: np.ndarray | None = None
        self._modes: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None
        for a in (indices, latent_values, sigmas, posterior_mean, L, B):
            a.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self.prior.dimension

    def __len__(self) -> int:
        return len(self.indices)

    # -- covariance --------------------------------------------------------

    def _factor(self) -> np.ndarray:
        if self._C is None:
            C = scipy.linalg.solve_triangular(self._L, self._B.T, lower=True).T
            C.setflags(write=False)
            self._C = C
        return self._C

    def diagonal(self) -> np.ndarray:
        """diag(Sigma_c); never larger than the prior diagonal."""
        C = self._factor()
        out = self.prior.latent.diagonal() - np.einsum("ij,ij->i", C, C)
        return np.maximum(out, 0.0)

    def covariance(self) -> np.ndarray:
        """Dense posterior covariance (intended for small d / verification)."""
        C = self._factor()
        return self.prior.latent.covariance() - C @ C.T

    # -- eigenmodes ---------------------------------------------------------

    def _mode_pieces(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exact posterior eigenpairs inside span([U, Q2]).

        Q2 is an orthonormal basis for the observed coordinate directions
        after removing their span(U) component, so [U, Q2] contains the whole
        column space of Sigma_c - delta I; a small symmetric eigenproblem
        there yields the exact nontrivial eigenpairs.
        """
        if self._modes is None:
            latent = self.prior.latent
            U, lam = latent.basis, latent.eigenvalues
            idx = self.indices
            q = idx.size
            G = -(U @ U[idx].T)
            G[idx, np.arange(q)] += 1.0
            Q2, R, _ = scipy.linalg.qr(G, mode="economic", pivoting=True)
            diag = np.abs(np.diag(R))
            # columns of G have norm <= 1, so rank decisions are made against
            # the unit coordinate scale; a tolerance relative to diag[0] would
            # keep pure-roundoff columns when span(U) already contains every
            # observed direction (full-rank basis)
            tol = max(G.shape) * np.finfo(np.float64).eps
            k = int(np.count_nonzero(diag > tol))
            Q2 = Q2[:, :k]
            C = self._factor()
            Ct = U.T @ C
            Cb = Q2.T @ C
            r = lam.size
            S = np.empty((r + k, r + k))
            S[:r, :r] = np.diag(lam) - Ct @ Ct.T
            S[:r, r:] = -Ct @ Cb.T
            S[r:, :r] = S[:r, r:].T
            S[r:, r:] = -Cb @ Cb.T
            w, V = np.linalg.eigh(S)
            order = np.argsort(w)[::-1]
            self._modes = (w[order], V[:, order], Q2)
        return self._modes

    @property
    def rank(self) -> int:
        """Number of recoverable posterior eigenpairs (r + rank of new span)."""
        w, _, _ = self._mode_pieces()
        return int(w.size)

    def mode_variances(self) -> np.ndarray:
        """All in-span posterior eigenvalues (including jitter), descending."""
        w, _, _ = self._mode_pieces()
        return np.maximum(w + self.prior.latent.jitter, 0.0)

    def top_modes(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Leading k posterior eigenpairs: (variances (k,), basis (d, k))."""
        w, V, Q2 = self._mode_pieces()
        if not 1 <= k <= w.size:
            raise InvalidMode(f"mode count {k} outside [1, {w.size}]")
        r = self.prior.latent.eigenvalues.size
        cols = self.prior.latent.basis @ V[:r, :k] + Q2 @ V[r:, :k]
        variances = np.maximum(w[:k] + self.prior.latent.jitter, 0.0)
        return variances, _fix_signs(cols)

    # -- instances ----------------------------------------------------------

    def posterior_instance(self) -> np.ndarray:
        """Posterior latent mean mapped through the marginals."""
        return self.prior.from_latent_vector(self.posterior_mean)

    def mode_instance(self, k: int, t: float) -> np.ndarray:
        return principal_mode_instance(self, k, t)

    def sample(self, n: int, rng=None) -> np.ndarray:
        return sample(self, n, rng)


# ---------------------------------------------------------------------------
# prediction, sampling, modes


def predict(model: JointModel, obs: PartialObservation | None = None) -> np.ndarray:
    """Marginal inverse of the (posterior) latent mean.

    With no observation this is the baseline instance: every component at its
    marginal median. Observed components are returned as predicted by the
    posterior, not overwritten by the raw observation.
    """
    if obs is None:
        return model.from_latent_vector(model.latent.mean)
    return condition(model, obs).posterior_instance()


def sample_latent(
    model: Union[JointModel, ConditionalModel], n: int, rng=None
) -> np.ndarray:
    """Draw n latent vectors, shape (n, d). Deterministic given rng seed.

    Unconditional draws are mean + U diag(sqrt(lambda)) xi + sqrt(delta) eta
    with xi then eta drawn in that order. Conditional draws apply Matheron's
    rule to an unconditional draw: x = mu_c + y - B A^{-1}(P y + sigma zeta),
    with zeta drawn after xi and eta; the result has exactly the posterior
    mean and covariance.
    """
    if n < 1:
        raise InvalidInput(f"sample count must be >= 1, got {n}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if isinstance(model, ConditionalModel):
        latent = model.prior.latent
    else:
        latent = model.latent
    U, lam, delta = latent.basis, latent.eigenvalues, latent.jitter
    d, r = U.shape
    xi = gen.standard_normal((r, n))
    eta = gen.standard_normal((d, n))
    y0 = (U * np.sqrt(lam)) @ xi + np.sqrt(delta) * eta
    if isinstance(model, ConditionalModel):
        q = len(model)
        zeta = gen.standard_normal((q, n))
        resid = y0[model.indices] + model.sigmas[:, None] * zeta
        correction = model._B @ scipy.linalg.cho_solve((model._L, True), resid)
        return (model.posterior_mean[:, None] + y0 - correction).T
    return (latent.mean[:, None] + y0).T


def sample(model: Union[JointModel, ConditionalModel], n: int, rng=None) -> np.ndarray:
    """Draw n instances in data space, shape (n, d)."""
    lat = sample_latent(model, n, rng)
    prior = model.prior if isinstance(model, ConditionalModel) else model
    return prior.tables.inverse_matrix(lat.T).T


def sample_latent_rows(
    model: Union[JointModel, ConditionalModel],
    rows: Sequence[int],
    n: int,
    rng=None,
) -> np.ndarray:
    """Latent draws restricted to the given components, shape (n, len(rows)).

    Same distribution as the matching columns of sample_latent, but the noise
    term is drawn only for the rows actually needed, so the random stream (and
    hence the realized values) differs from sample_latent for the same seed.
    Intended for large d where only a few components are reported.
    """
    if n < 1:
        raise InvalidInput(f"sample count must be >= 1, got {n}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    conditional = isinstance(model, ConditionalModel)
    latent = model.prior.latent if conditional else model.latent
    U, lam, delta = latent.basis, latent.eigenvalues, latent.jitter
    d, r = U.shape
    rows = np.asarray(rows, dtype=np.intp)
    if rows.size == 0:
        raise InvalidInput("rows must be nonempty")
    if rows.min() < 0 or rows.max() >= d:
        raise InvalidInput(f"row index outside [0, {d})")
    xi = gen.standard_normal((r, n))
    scaled = U * np.sqrt(lam)
    if not conditional:
        eta = gen.standard_normal((rows.size, n))
        y = scaled[rows] @ xi + np.sqrt(delta) * eta
        return (latent.mean[rows, None] + y).T
    # The observed components share their noise draws with any requested row
    # that coincides with them, as Matheron's rule requires a single y draw.
    uni, inv = np.unique(np.concatenate([rows, model.indices]), return_inverse=True)
    eta = gen.standard_normal((uni.size, n))
    y_uni = scaled[uni] @ xi + np.sqrt(delta) * eta
    zeta = gen.standard_normal((len(model), n))
    resid = y_uni[inv[rows.size :]] + model.sigmas[:, None] * zeta
    correction = model._B[rows] @ scipy.linalg.cho_solve((model._L, True), resid)
    y_rows = y_uni[inv[: rows.size]]
    return (model.posterior_mean[rows, None] + y_rows - correction).T


def principal_mode_instance(
    model: Union[JointModel, ConditionalModel], k: int, t: float
) -> np.ndarray:
    """Instance at mean + t sqrt(lambda_k) u_k, mapped through the marginals.

    k is 1-based; for a ConditionalModel the posterior mean and posterior
    eigenpairs are used.
    """
    if not np.isfinite(t):
        raise InvalidInput(f"mode coefficient must be finite, got {t!r}")
    k = int(k)
    if isinstance(model, ConditionalModel):
        if not 1 <= k <= model.rank:
            raise InvalidMode(f"mode index {k} outside [1, {model.rank}]")
        variances, basis = model.top_modes(k)
        x = model.posterior_mean + float(t) * np.sqrt(variances[k - 1]) * basis[:, k - 1]
        return model.prior.from_latent_vector(x)
    latent = model.latent
    if not 1 <= k <= latent.rank:
        raise InvalidMode(f"mode index {k} outside [1, {latent.rank}]")
    x = latent.mean + float(t) * np.sqrt(latent.eigenvalues[k - 1]) * latent.basis[:, k - 1]
    return model.from_latent_vector(x)


# ---------------------------------------------------------------------------
# sigma cross-validation


@dataclass(frozen=True)
class CrossValidationResult(Mapping):
    """Selected sigma per block plus the full (sigma, error) table."""

    selected: Mapping[str, float]
    errors: Mapping[str, tuple[tuple[float, float], ...]]

    def __getitem__(self, key: str) -> float:
        return self.selected[key]

    def __iter__(self):
        return iter(self.selected)

    def __len__(self) -> int:
        return len(self.selected)


def cross_validate_sigma(
    Y: np.ndarray,
    specs: Sequence[VariableSpec],
    sigma_grid: Mapping[str, Sequence[float]],
    folds: int = 5,
    config: FitConfig | None = None,
) -> CrossValidationResult:
    """Select, per block, the observation sigma minimizing held-out error.

    For each fold a model is fitted on the training split; for each candidate
    sigma the block's components of every validation instance are observed at
    that sigma and all remaining components predicted. The score is the mean
    absolute error over predicted components, instances and folds; ties keep
    the earlier grid entry. Fold assignment is a deterministic function of
    ``config.seed``.
    """
    config = config or FitConfig()
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise InvalidInput("Y must be a (d, M) matrix")
    d, m = Y.shape
    if folds < 2:
        raise InvalidInput(f"folds must be >= 2, got {folds}")
    if m < folds:
        raise InvalidInput(f"fewer instances ({m}) than folds ({folds})")
    if not sigma_grid:
        raise InvalidInput("sigma grid is empty")
    specs = tuple(specs)

    block_rows: dict[str, np.ndarray] = {}
    for key, grid in sigma_grid.items():
        try:
            block = Block(key)
        except ValueError:
            raise InvalidTask(f"unknown block {key!r}") from None
        grid = [float(s) for s in grid]
        if not grid:
            raise InvalidInput(f"{key}: empty sigma grid")
        if any(not (np.isfinite(s) and s >= 0) for s in grid):
            raise InvalidInput(f"{key}: sigmas must be finite and >= 0")
        rows = np.array([i for i, s in enumerate(specs) if s.block is block], dtype=np.intp)
        if rows.size == 0:
            raise InvalidTask(f"no components in block {key!r}")
        if rows.size == d:
            raise InvalidInput(f"block {key!r} covers every component; nothing to predict")
        block_rows[key] = rows

    order = np.random.default_rng([int(config.seed) & ((1 << 63) - 1), 1]).permutation(m)
    fold_of = np.empty(m, dtype=np.intp)
    fold_of[order] = np.arange(m) % folds

    sums = {key: np.zeros(len(sigma_grid[key])) for key in block_rows}
    counts = {key: np.zeros(len(sigma_grid[key])) for key in block_rows}
    for f in range(folds):
        val = np.nonzero(fold_of == f)[0]
        train = np.nonzero(fold_of != f)[0]
        if train.size < 3:
            raise InvalidInput(
                f"fold {f} leaves {train.size} training instances; need at least 3"
            )
        model = fit_joint_model(Y[:, train], specs, config)
        Z = model.tables.forward_matrix(Y[:, val])
        for key, rows in block_rows.items():
            rest = np.setdiff1d(np.arange(d), rows)
            truth = Y[np.ix_(rest, val)]
            for j, s in enumerate(sigma_grid[key]):
                mean_c = posterior_mean_matrix(
                    model, rows, np.full(rows.size, float(s)), Z[rows]
                )
                pred = model.tables.inverse_matrix(mean_c)
                sums[key][j] += np.abs(pred[rest] - truth).sum()
                counts[key][j] += truth.size

    selected: dict[str, float] = {}
    tables: dict[str, tuple[tuple[float, float], ...]] = {}
    for key in block_rows:
        grid = [float(s) for s in sigma_grid[key]]
        errs = sums[key] / counts[key]
        best = int(np.argmin(errs))
        selected[key] = grid[best]
        tables[key] = tuple((grid[j], float(errs[j])) for j in range(len(grid)))
    return CrossValidationResult(selected=selected, errors=tables)
