"""Reconstruction benchmark and sample-distribution reports.

The reconstruction experiment mirrors the classic table structure: fit on a
train split, then for each validation instance observe one combination of
blocks and predict a held-out target, reporting mean error and its standard
deviation per (target, combination) cell. Error metrics by target type:

* shape target: per-vertex Euclidean distance (mm), averaged over vertices;
* feature target: mean absolute difference;
* continuous/ordinal indicator: absolute error (ordinals on the level scale
  after inverse-CDF projection);
* binary indicator: percent correct.

Combinations that would observe the target itself have the target removed
from the observed set; explicit self-prediction rows (error exactly 0) are
available behind ``include_self`` and left out of reports by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .errors import InvalidInput, InvalidTask
from .meshdata import Cohort
from .model import (
    ConditionalModel,
    FitConfig,
    JointModel,
    fit_joint_model,
    posterior_mean_matrix,
    sample,
)
from .specs import Block, Kind

__all__ = [
    "ReportRow",
    "ExperimentReport",
    "HistogramRow",
    "HistogramTable",
    "DEFAULT_COMBINATIONS",
    "run_reconstruction_experiment",
    "sample_distribution_report",
    "histogram_masses",
]

DEFAULT_COMBINATIONS = (
    "mean",
    "shape",
    "feature",
    "indicators",
    "indicators+volume",
    "combined",
)
_VOLUME = "volume"
_SELF = "self"


@dataclass(frozen=True)
class ReportRow:
    """One cell: error of predicting ``target`` from ``observed``."""

    target: str
    observed: str
    metric: str
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class ExperimentReport:
    """All cells plus experiment metadata; row order is deterministic."""

    rows: tuple[ReportRow, ...]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def get(self, target: str, observed: str) -> ReportRow:
        for row in self.rows:
            if row.target == target and row.observed == observed:
                return row
        raise InvalidTask(f"no report row ({target!r}, {observed!r})")

    def to_dsv(self) -> str:
        lines = ["target,observed,metric,mean,std,n"]
        for r in self.rows:
            lines.append(
                f"{r.target},{r.observed},{r.metric},{r.mean!r},{r.std!r},{r.n}"
            )
        return "\n".join(lines) + "\n"

    def format_table(self) -> str:
        """Human-readable fixed-width rendering (display only)."""
        header = ("target", "observed", "metric", "mean", "std", "n")
        cells = [header]
        for r in self.rows:
            cells.append(
                (r.target, r.observed, r.metric, f"{r.mean:.4f}", f"{r.std:.4f}", str(r.n))
            )
        widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
        lines = []
        for i, row in enumerate(cells):
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
            if i == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def _resolve_target(model: JointModel, target: str) -> tuple[np.ndarray, str]:
    """Target component indices and the metric used to score it."""
    layout = model.layout
    if target == "shape":
        if layout is None or layout.vertex_count == 0:
            raise InvalidTask("model has no shape block")
        return layout.block_indices(Block.COORDINATE), "vertex_mm"
    if target == "feature":
        if layout is None or layout.vertex_count == 0:
            raise InvalidTask("model has no feature block")
        return layout.block_indices(Block.FEATURE), "mae"
    for i, s in enumerate(model.specs):
        if s.name == target:
            metric = "pct_correct" if s.kind is Kind.BINARY else "mae"
            return np.array([i], dtype=np.intp), metric
    raise InvalidTask(f"unknown target {target!r}")


def _block_sets(model: JointModel) -> dict[str, np.ndarray]:
    specs = model.specs
    out = {
        "coordinate": np.array(
            [i for i, s in enumerate(specs) if s.block is Block.COORDINATE], dtype=np.intp
        ),
        "feature": np.array(
            [i for i, s in enumerate(specs) if s.block is Block.FEATURE], dtype=np.intp
        ),
        "indicator": np.array(
            [i for i, s in enumerate(specs) if s.block is Block.INDICATOR], dtype=np.intp
        ),
    }
    vol = [i for i, s in enumerate(specs) if s.name == _VOLUME]
    out["volume"] = np.array(vol, dtype=np.intp)
    return out


def _combo_indices(
    combo: str, blocks: Mapping[str, np.ndarray], target_idx: np.ndarray
) -> np.ndarray:
    coord, feat, ind = blocks["coordinate"], blocks["feature"], blocks["indicator"]
    vol = blocks["volume"]
    if combo == "mean":
        idx = np.array([], dtype=np.intp)
    elif combo == "shape":
        idx = coord
    elif combo == "feature":
        idx = feat
    elif combo == "indicators":
        idx = np.setdiff1d(ind, vol)
    elif combo == "indicators+volume":
        idx = ind
    elif combo == "combined":
        idx = np.concatenate([coord, feat, ind])
    else:
        raise InvalidTask(f"unknown observed combination {combo!r}")
    return np.setdiff1d(idx, target_idx)


def _score(
    metric: str, pred: np.ndarray, truth: np.ndarray
) -> np.ndarray:
    """Per-validation-instance error; pred/truth have shape (t, n_val)."""
    if metric == "vertex_mm":
        n3 = pred.shape[0]
        diff = (pred - truth).reshape(n3 // 3, 3, -1)
        return np.sqrt((diff**2).sum(axis=1)).mean(axis=0)
    if metric == "mae":
        return np.abs(pred - truth).mean(axis=0)
    if metric == "pct_correct":
        return 100.0 * (pred == truth).all(axis=0).astype(np.float64)
    raise InvalidTask(f"unknown metric {metric!r}")


def _default_targets(model: JointModel) -> tuple[str, ...]:
    names = [s.name for s in model.specs if s.block is Block.INDICATOR]
    preferred = [n for n in ("age", "mrs", "sex") if n in names]
    indicators = preferred if len(preferred) == 3 else names[:3]
    targets = list(indicators)
    if model.layout is not None and model.layout.vertex_count > 0:
        targets += ["shape", "feature"]
    return tuple(targets)


def run_reconstruction_experiment(
    cohort: Cohort,
    train_count: int | None = None,
    tasks: Sequence[str] | None = None,
    combinations: Sequence[str] = DEFAULT_COMBINATIONS,
    config: FitConfig | None = None,
    sigma: float | Mapping[str, float] = 0.2,
    split_seed: int = 0,
    include_self: bool = False,
) -> ExperimentReport:
    """Fit on a random split and score every (target, combination) cell.

    train_count defaults to round(M * 600/793), the proportion of the
    classic 793-patient split. sigma is a scalar or per-block mapping of
    observation noise; the default 0.2 keeps large observation sets from
    overfitting sampling error in the estimated covariance. Deterministic
    for fixed seeds.
    """
    Y = cohort.Y
    d, m = Y.shape
    if train_count is None:
        train_count = int(round(m * 600.0 / 793.0))
    if not 3 <= train_count < m:
        raise InvalidInput(
            f"train_count {train_count} must be in [3, M) for M = {m} instances"
        )
    config = config or FitConfig()
    perm = np.random.default_rng([int(split_seed) & ((1 << 63) - 1), 17]).permutation(m)
    train = np.sort(perm[:train_count])
    val = np.sort(perm[train_count:])

    model = fit_joint_model(Y[:, train], cohort.specs, config)
    Z_val = model.tables.forward_matrix(Y[:, val])
    blocks = _block_sets(model)
    baseline = model.predict()

    def sigma_of(component: int) -> float:
        if isinstance(sigma, Mapping):
            return float(sigma.get(model.specs[component].block.value, 0.0))
        return float(sigma)

    targets = tuple(tasks) if tasks is not None else _default_targets(model)
    rows: list[ReportRow] = []
    for target in targets:
        t_idx, metric = _resolve_target(model, target)
        truth = Y[np.ix_(t_idx, val)]
        combos = list(combinations) + ([_SELF] if include_self else [])
        for combo in combos:
            if combo == _SELF:
                obs_idx = t_idx
            else:
                obs_idx = _combo_indices(combo, blocks, t_idx)
            if obs_idx.size == 0:
                pred_full = np.repeat(baseline[:, None], val.size, axis=1)
            else:
                if combo == _SELF:
                    # exact self-observation: noise-free by definition
                    sig = np.zeros(obs_idx.size)
                else:
                    sig = np.array([sigma_of(i) for i in obs_idx])
                mean_c = posterior_mean_matrix(model, obs_idx, sig, Z_val[obs_idx])
                pred_full = model.tables.inverse_matrix(mean_c)
            errs = _score(metric, pred_full[t_idx], truth)
            rows.append(
                ReportRow(
                    target=target,
                    observed=combo,
                    metric=metric,
                    mean=float(errs.mean()),
                    std=float(errs.std(ddof=1)) if errs.size > 1 else 0.0,
                    n=int(errs.size),
                )
            )

    return ExperimentReport(
        rows=tuple(rows),
        metadata={
            "instances": m,
            "dimension": d,
            "train_size": int(train_count),
            "validation_size": int(m - train_count),
            "split_seed": int(split_seed),
            "fit_seed": int(config.seed),
            "rankings": int(config.rankings),
        },
    )


# ---------------------------------------------------------------------------
# sample distributions


def histogram_masses(
    values: np.ndarray, bins: int
) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """Bin values into (edges, masses) with masses = counts / n (sum 1).

    A near-degenerate spread (relative range below 1e-9) is binned as a point
    mass, so float solve noise in an exactly observed component cannot smear
    its spike across several bins.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise InvalidInput("cannot bin an empty sample")
    scale = max(1.0, float(np.abs(values).max()))
    if float(values.max() - values.min()) <= 1e-9 * scale:
        values = np.full(values.shape, float(values[0]))
    counts, edges = np.histogram(values, bins=bins)
    n = values.size
    return tuple(float(e) for e in edges), tuple(float(c) / n for c in counts)


@dataclass(frozen=True)
class HistogramRow:
    """One variable's histogram; masses sum to 1."""

    variable: str
    scale: str  # "value" or "log"
    edges: tuple[float, ...]
    masses: tuple[float, ...]


@dataclass(frozen=True)
class HistogramTable:
    rows: tuple[HistogramRow, ...]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def get(self, variable: str) -> HistogramRow:
        for row in self.rows:
            if row.variable == variable:
                return row
        raise InvalidTask(f"no histogram for {variable!r}")

    def to_dsv(self) -> str:
        lines = ["variable,scale,bin_lo,bin_hi,mass"]
        for r in self.rows:
            for lo, hi, mass in zip(r.edges[:-1], r.edges[1:], r.masses):
                lines.append(f"{r.variable},{r.scale},{lo!r},{hi!r},{mass!r}")
        return "\n".join(lines) + "\n"


def sample_distribution_report(
    model: Union[JointModel, ConditionalModel],
    variables: Sequence[str] | None = None,
    n: int = 1000,
    bins: int = 30,
    rng=None,
) -> HistogramTable:
    """Histograms of n sampled values per variable (masses sum to 1).

    variables defaults to the indicator block. The ``volume`` variable is
    binned on the natural-log scale, following the usual display convention
    for heavy-tailed burden totals.
    """
    prior = model.prior if isinstance(model, ConditionalModel) else model
    if variables is None:
        variables = [s.name for s in prior.specs if s.block is Block.INDICATOR]
        if not variables:
            variables = list(prior.names)
    name_to_index = {s.name: i for i, s in enumerate(prior.specs)}
    for v in variables:
        if v not in name_to_index:
            raise InvalidTask(f"unknown variable {v!r}")
    if bins < 1:
        raise InvalidInput(f"bins must be >= 1, got {bins}")
    draws = sample(model, n, rng)
    rows = []
    for v in variables:
        values = draws[:, name_to_index[v]]
        scale = "value"
        if v == _VOLUME:
            values = np.log(np.maximum(values, np.finfo(np.float64).tiny))
            scale = "log"
        edges, masses = histogram_masses(values, bins)
        rows.append(HistogramRow(variable=v, scale=scale, edges=edges, masses=masses))
    return HistogramTable(
        rows=tuple(rows), metadata={"samples": int(n), "bins": int(bins)}
    )
