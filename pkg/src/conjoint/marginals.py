"""One-dimensional marginal models and the data <-> latent transforms.

Each component gets an invertible chain

    data space --W--> uniform (0,1) --ndtri--> standard-normal latent space

where W is either the empirical CDF on plotting positions r/(M+1) (ties share
a mid-rank plateau) or a parametric Gaussian CDF. The latent value is what the
joint dependency model sees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

from . import _kernels
from .errors import DegenerateMarginal, InvalidInput, InvalidLevel
from .specs import Kind, VariableSpec

# Strict interior of (0, 1) for CDF values: keeps ndtri finite everywhere.
_U_LO = np.nextafter(0.0, 1.0)
_U_HI = np.nextafter(1.0, 0.0)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class GaussianMarginal:
    """Parametric Gaussian marginal: latent is the standardized value."""

    mean: float
    stddev: float

    def __post_init__(self):
        if not (self.stddev > 0 and math.isfinite(self.stddev) and math.isfinite(self.mean)):
            raise DegenerateMarginal(f"gaussian marginal needs finite mean and stddev > 0, got "
                                     f"mean={self.mean}, stddev={self.stddev}")


@dataclass(frozen=True)
class EmpiricalMarginal:
    """Empirical marginal on plotting positions u_r = r/(M+1).

    ``values`` are the sorted training values, ``positions`` the per-rank
    plotting positions. Tied values share a plateau: the forward CDF maps each
    distinct value to its mid-rank position, and the quantile knots keep one
    entry per rank so plateaus invert to the shared value.
    """

    values: np.ndarray
    positions: np.ndarray
    # Derived tables (filled in __post_init__):
    knot_values: np.ndarray = field(default=None, repr=False)  # distinct values, ascending
    knot_positions: np.ndarray = field(default=None, repr=False)  # mid-rank u per distinct value
    cum_positions: np.ndarray = field(default=None, repr=False)  # upper interval bound per value
    latent_bounds: np.ndarray = field(default=None, repr=False)  # ndtri(cum_positions[:-1])

    def __post_init__(self):
        values = _freeze(self.values)
        positions = _freeze(self.positions)
        if values.ndim != 1 or values.shape != positions.shape or values.size == 0:
            raise InvalidInput("empirical marginal needs matching 1-D values and positions")
        m = values.size
        w, start = np.unique(values, return_index=True)
        upper = np.append(start[1:], m)  # one-past-last rank (0-based) per distinct value
        midrank = (start + 1 + upper) / 2.0  # mean of the 1-based ranks in the plateau
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "knot_values", _freeze(w))
        object.__setattr__(self, "knot_positions", _freeze(midrank / (m + 1)))
        object.__setattr__(self, "cum_positions", _freeze(upper / (m + 1)))
        object.__setattr__(self, "latent_bounds", _freeze(ndtri(self.cum_positions[:-1])))

    @property
    def size(self) -> int:
        return int(self.values.size)


Variant = Union[EmpiricalMarginal, GaussianMarginal]


@dataclass(frozen=True)
class MarginalModel:
    """A fitted marginal: invertible map data space <-> N(0,1) latent space."""

    spec: VariableSpec
    variant: Variant

    # -- admissibility ---------------------------------------------------

    def admissible_levels(self) -> np.ndarray | None:
        """Admissible values for non-continuous kinds (None for continuous)."""
        if self.spec.is_continuous:
            return None
        if self.spec.ordinal_levels is not None:
            return np.asarray(self.spec.ordinal_levels, dtype=np.float64)
        if isinstance(self.variant, EmpiricalMarginal):
            if self.spec.kind is Kind.DISCRETE:
                return None  # any integer is admissible
            return self.variant.knot_values
        return None

    def check_admissible(self, value: float) -> None:
        if self.spec.is_continuous:
            return
        if not math.isfinite(value):
            raise InvalidLevel(f"{self.spec.name}: non-finite level {value!r}")
        levels = self.admissible_levels()
        if levels is None:  # undeclared discrete: integers only
            if value != math.floor(value):
                raise InvalidLevel(f"{self.spec.name}: {value!r} is not an integer level")
            return
        if not np.any(levels == value):
            raise InvalidLevel(f"{self.spec.name}: {value!r} is not an admissible level")

    # -- forward (data -> latent) ----------------------------------------

    def cdf(self, value) -> np.ndarray | float:
        """W(value): CDF in the uniform space, strictly inside (0, 1)."""
        v = np.asarray(value, dtype=np.float64)
        if isinstance(self.variant, GaussianMarginal):
            u = ndtr((v - self.variant.mean) / self.variant.stddev)
        else:
            u = np.interp(v, self.variant.knot_values, self.variant.knot_positions)
        u = np.clip(u, _U_LO, _U_HI)
        return float(u) if np.isscalar(value) or v.ndim == 0 else u

    def forward(self, value) -> float:
        """Latent value ndtri(W(value)). Monotone non-decreasing and finite."""
        if not math.isfinite(float(value)):
            raise InvalidInput(f"{self.spec.name}: non-finite value {value!r}")
        if isinstance(self.variant, GaussianMarginal):
            return (float(value) - self.variant.mean) / self.variant.stddev
        self.check_admissible(float(value))
        u = np.interp(float(value), self.variant.knot_values, self.variant.knot_positions)
        return float(ndtri(u))

    # -- inverse (latent -> data) ----------------------------------------

    def inverse(self, x: float) -> float:
        if isinstance(self.variant, GaussianMarginal):
            return self.variant.mean + self.variant.stddev * float(x)
        v = self.variant
        if self.spec.is_continuous:
            # quantile interpolation over per-rank knots, clamped to the
            # training range outside
            return float(np.interp(ndtr(float(x)), v.positions, v.values))
        # smallest level whose cumulative plotting-position interval contains
        # Phi(x); bucketed against latent boundaries so attained levels
        # round-trip exactly
        idx = int(np.searchsorted(v.latent_bounds, float(x), side="left"))
        return float(v.knot_values[idx])


def fit_marginal(column: Sequence[float] | np.ndarray, spec: VariableSpec) -> MarginalModel:
    """Fit the marginal model declared by ``spec`` on one training column.

    Empirical variants store the sorted values with plotting positions
    r/(M+1); the Gaussian variant stores the sample mean and unbiased stddev.

    Raises
    ------
    InvalidInput
        Empty column, fewer than two values, or non-finite entries.
    DegenerateMarginal
        Gaussian marginal on a zero-variance column.
    InvalidLevel
        Non-continuous column containing a non-admissible level.
    """
    col = np.asarray(column, dtype=np.float64).ravel()
    if col.size == 0:
        raise InvalidInput(f"{spec.name}: empty column")
    if col.size < 2:
        raise InvalidInput(f"{spec.name}: need at least 2 training values, got {col.size}")
    if not np.all(np.isfinite(col)):
        raise InvalidInput(f"{spec.name}: column contains non-finite values")

    if spec.marginal.value == "gaussian":
        std = float(col.std(ddof=1))
        if std == 0.0:
            raise DegenerateMarginal(f"{spec.name}: zero-variance column with gaussian marginal")
        return MarginalModel(spec=spec, variant=GaussianMarginal(float(col.mean()), std))

    if not spec.is_continuous:
        if spec.ordinal_levels is not None:
            bad = np.setdiff1d(np.unique(col), np.asarray(spec.ordinal_levels))
            if bad.size:
                raise InvalidLevel(f"{spec.name}: non-admissible training levels {bad.tolist()}")
        elif spec.kind is Kind.DISCRETE and np.any(col != np.floor(col)):
            raise InvalidLevel(f"{spec.name}: discrete column has non-integer values")
        if spec.kind is Kind.BINARY and np.unique(col).size > 2:
            raise InvalidLevel(f"{spec.name}: binary column with more than 2 distinct values")

    order = np.sort(col)
    positions = np.arange(1, col.size + 1, dtype=np.float64) / (col.size + 1)
    return MarginalModel(spec=spec, variant=EmpiricalMarginal(order, positions))


def to_latent(value: float, marginal: MarginalModel) -> float:
    """Map one data-space value to the standard-normal latent space."""
    return marginal.forward(value)


def from_latent(x: float, marginal: MarginalModel) -> float:
    """Map one latent value back to data space (total on finite inputs)."""
    return marginal.inverse(x)


class TransformTables:
    """Batched transforms across all d components of a model.

    Packs the per-component marginal tables into flat arrays so whole
    matrices move between data and latent space through the row-table
    kernels instead of a Python loop per component.
    """

    def __init__(self, marginals: Sequence[MarginalModel]):
        self.marginals = list(marginals)
        d = len(self.marginals)
        kinds = np.zeros(d, dtype=np.int8)  # 0 gaussian, 1 empirical-continuous, 2 non-continuous
        self.gauss_mean = np.zeros(d)
        self.gauss_std = np.ones(d)
        for i, m in enumerate(self.marginals):
            if isinstance(m.variant, GaussianMarginal):
                self.gauss_mean[i] = m.variant.mean
                self.gauss_std[i] = m.variant.stddev
            else:
                kinds[i] = 1 if m.spec.is_continuous else 2
        self.kinds = kinds
        self.gauss_rows = np.flatnonzero(kinds == 0)
        self.emp_rows = np.flatnonzero(kinds != 0)
        self.cont_rows = np.flatnonzero(kinds == 1)
        self.disc_rows = np.flatnonzero(kinds == 2)

        def pack(rows, per_row):
            chunks = [per_row(self.marginals[i].variant) for i in rows]
            offsets = np.zeros(len(chunks) + 1, dtype=np.int64)
            if chunks:
                offsets[1:] = np.cumsum([len(c[0]) for c in chunks])
                flat = tuple(np.concatenate([c[k] for c in chunks]) for k in range(len(chunks[0])))
            else:
                flat = None
            return offsets, flat

        # forward: value -> mid-rank position (shared by all empirical rows)
        self._fwd_off, self._fwd = pack(self.emp_rows, lambda v: (v.knot_values, v.knot_positions))
        # inverse, continuous: position -> value over per-rank knots
        self._qinv_off, self._qinv = pack(self.cont_rows, lambda v: (v.positions, v.values))
        # inverse, non-continuous: latent boundaries + level table
        self._bnd_off, self._bnd = pack(self.disc_rows, lambda v: (v.latent_bounds,))
        self._lvl_off, self._lvl = pack(self.disc_rows, lambda v: (v.knot_values,))

    def forward_matrix(self, Y: np.ndarray) -> np.ndarray:
        """Data-space matrix (d, n) -> latent matrix (d, n)."""
        Y = np.asarray(Y, dtype=np.float64)
        X = np.empty_like(Y)
        g = self.gauss_rows
        if g.size:
            X[g] = (Y[g] - self.gauss_mean[g, None]) / self.gauss_std[g, None]
        e = self.emp_rows
        if e.size:
            u = _kernels.interp_many(Y[e], self._fwd[0], self._fwd[1], self._fwd_off)
            X[e] = ndtri(u)
        return X

    def inverse_matrix(self, X: np.ndarray) -> np.ndarray:
        """Latent matrix (d, n) -> data-space matrix (d, n)."""
        X = np.asarray(X, dtype=np.float64)
        Y = np.empty_like(X)
        g = self.gauss_rows
        if g.size:
            Y[g] = self.gauss_mean[g, None] + self.gauss_std[g, None] * X[g]
        c = self.cont_rows
        if c.size:
            Y[c] = _kernels.interp_many(ndtr(X[c]), self._qinv[0], self._qinv[1], self._qinv_off)
        q = self.disc_rows
        if q.size:
            idx = _kernels.bucket_many(X[q], self._bnd[0], self._bnd_off)
            Y[q] = self._lvl[0][self._lvl_off[:-1, None] + idx]
        return Y

    def inverse_rows(self, rows: np.ndarray, X: np.ndarray) -> np.ndarray:
        """Latent rows (len(rows), n) -> data space, for a subset of components."""
        rows = np.asarray(rows)
        out = np.empty_like(np.asarray(X, dtype=np.float64))
        for j, i in enumerate(rows):
            m = self.marginals[i]
            if isinstance(m.variant, GaussianMarginal):
                out[j] = m.variant.mean + m.variant.stddev * X[j]
            elif m.spec.is_continuous:
                out[j] = np.interp(ndtr(X[j]), m.variant.positions, m.variant.values)
            else:
                idx = np.searchsorted(m.variant.latent_bounds, X[j], side="left")
                out[j] = m.variant.knot_values[idx]
        return out
