"""Synthetic cohorts with known ground-truth dependency structure.

The generator draws J standard-normal factors per instance and derives every
block from them:

* meshes: a shared Fibonacci-sphere topology whose per-vertex radii are affine
  in the factors (smooth spherical patterns per factor) plus isotropic noise;
* features: lognormal per-vertex burden, exp of an affine-in-factors smooth
  field, so nonnegativity holds by construction;
* indicators: affine factor combinations pushed through per-variable maps
  (affine for continuous, threshold cuts for binary/ordinal), plus a computed
  total-feature ``volume`` indicator.

Because every generated variable is a monotone transform of an affine
function of the factors (plus idiosyncratic noise), the ground truth retains
the exact loading rows and noise scales, which oracle tests use to check
recovered eigenspaces and correlations.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull

from .errors import InvalidConfig
from .meshdata import (
    Cohort,
    InstanceLayout,
    TriangleMesh,
    build_component_specs,
    vectorize,
    write_feature_field,
    write_indicator_table,
    write_mesh,
)
from .specs import Block, Kind, VariableSpec

__all__ = [
    "IndicatorRecipe",
    "SyntheticConfig",
    "GroundTruth",
    "default_indicator_recipes",
    "default_indicator_specs",
    "generate_cohort",
    "generate_matrix",
    "write_cohort",
]

_MASK63 = (1 << 63) - 1
VOLUME_NAME = "volume"


@dataclass(frozen=True)
class IndicatorRecipe:
    """How one generated indicator derives from the factors.

    The raw signal is g = weights . factors + noise * eps. Continuous
    variables are offset + scale * g; binary/ordinal variables take level
    ``levels[#cuts <= g]``, with cuts strictly increasing and one fewer than
    the admissible levels.
    """

    spec: VariableSpec
    weights: tuple[float, ...]
    noise: float = 0.5
    offset: float = 0.0
    scale: float = 1.0
    cuts: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.cuts is not None:
            object.__setattr__(self, "cuts", tuple(float(c) for c in self.cuts))

    def validate(self, factor_count: int) -> None:
        name = self.spec.name
        if self.spec.block is not Block.INDICATOR:
            raise InvalidConfig(f"{name}: recipe spec must be an indicator")
        if len(self.weights) != factor_count:
            raise InvalidConfig(
                f"{name}: {len(self.weights)} weights for {factor_count} factors"
            )
        if not all(np.isfinite(self.weights)):
            raise InvalidConfig(f"{name}: non-finite weights")
        if not (np.isfinite(self.noise) and self.noise >= 0):
            raise InvalidConfig(f"{name}: noise must be finite and >= 0")
        if self.spec.is_continuous:
            if self.cuts is not None:
                raise InvalidConfig(f"{name}: cuts given for a continuous variable")
            if not (np.isfinite(self.offset) and np.isfinite(self.scale)):
                raise InvalidConfig(f"{name}: non-finite offset/scale")
            return
        levels = self.spec.ordinal_levels
        if levels is None:
            raise InvalidConfig(f"{name}: non-continuous recipe needs declared levels")
        if self.cuts is None:
            raise InvalidConfig(f"{name}: non-continuous recipe needs cuts")
        if len(self.cuts) != len(levels) - 1:
            raise InvalidConfig(
                f"{name}: {len(self.cuts)} cuts for {len(levels)} levels"
            )
        cuts = np.asarray(self.cuts)
        if not np.all(np.isfinite(cuts)):
            raise InvalidConfig(f"{name}: non-finite cuts")
        if np.any(cuts[1:] <= cuts[:-1]):
            raise InvalidConfig(f"{name}: cuts must be strictly increasing")


def _cyc(factor_count: int, main: int, strength: float = 1.0, cross: float = 0.3):
    """Loading row concentrated on one factor with a small cross-loading."""
    w = np.zeros(factor_count)
    w[main % factor_count] = strength
    if factor_count > 1:
        w[(main + 1) % factor_count] = cross
    return tuple(w)


def default_indicator_specs() -> tuple[VariableSpec, ...]:
    """The nine default indicators (volume last, computed from features)."""
    return tuple(r.spec for r in default_indicator_recipes(3)) + (
        VariableSpec(name=VOLUME_NAME, kind=Kind.CONTINUOUS, block=Block.INDICATOR),
    )


def default_indicator_recipes(factor_count: int) -> tuple[IndicatorRecipe, ...]:
    """Eight generated indicators mirroring a stroke-cohort panel."""

    def ind(name, kind, levels=None, labels=None):
        return VariableSpec(
            name=name,
            kind=kind,
            block=Block.INDICATOR,
            ordinal_levels=levels,
            labels=labels,
        )

    return (
        IndicatorRecipe(
            spec=ind("age", Kind.CONTINUOUS),
            weights=_cyc(factor_count, 0, 1.2),
            noise=0.4,
            offset=70.0,
            scale=8.0,
        ),
        IndicatorRecipe(
            spec=ind("sex", Kind.BINARY, (0, 1), labels=("female", "male")),
            weights=_cyc(factor_count, 1, 1.0),
            noise=0.6,
            cuts=(0.1,),
        ),
        IndicatorRecipe(
            spec=ind("hypertension", Kind.BINARY, (0, 1)),
            weights=_cyc(factor_count, 0, 0.8),
            noise=0.7,
            cuts=(-0.2,),
        ),
        IndicatorRecipe(
            spec=ind("hyperlipidemia", Kind.BINARY, (0, 1)),
            weights=_cyc(factor_count, 2, 0.7),
            noise=0.8,
            cuts=(0.0,),
        ),
        IndicatorRecipe(
            spec=ind("afib", Kind.BINARY, (0, 1)),
            weights=_cyc(factor_count, 0, 0.6),
            noise=0.9,
            cuts=(0.9,),
        ),
        IndicatorRecipe(
            spec=ind("smoking", Kind.ORDINAL, tuple(range(1, 7))),
            weights=_cyc(factor_count, 1, 0.9),
            noise=0.7,
            cuts=(-1.3, -0.5, 0.2, 0.8, 1.5),
        ),
        IndicatorRecipe(
            spec=ind("nihss", Kind.ORDINAL, tuple(range(0, 43))),
            weights=_cyc(factor_count, 0, 1.1),
            noise=0.5,
            cuts=tuple(np.linspace(-2.2, 2.6, 42)),
        ),
        IndicatorRecipe(
            spec=ind("mrs", Kind.ORDINAL, tuple(range(0, 7))),
            weights=_cyc(factor_count, 0, 1.0),
            noise=0.6,
            cuts=(-1.5, -0.9, -0.3, 0.3, 0.9, 1.5),
        ),
    )


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator configuration; defaults give a desk-scale 9-indicator cohort."""

    instances: int = 120
    vertices: int = 20
    factors: int = 3
    seed: int = 0
    base_radius: float = 10.0
    shape_coupling: float = 0.6
    mesh_noise: float = 0.05
    feature_base: float = 1.0
    feature_coupling: float = 0.8
    feature_noise: float = 0.4
    block_factor_noise: float = 0.4
    recipes: tuple[IndicatorRecipe, ...] | None = None

    def resolved_recipes(self) -> tuple[IndicatorRecipe, ...]:
        return (
            default_indicator_recipes(self.factors)
            if self.recipes is None
            else tuple(self.recipes)
        )

    def validate(self) -> None:
        if self.instances < 3:
            raise InvalidConfig(f"instances must be >= 3, got {self.instances}")
        if self.vertices < 4:
            raise InvalidConfig(f"vertices must be >= 4, got {self.vertices}")
        if self.factors < 1:
            raise InvalidConfig(f"factors must be >= 1, got {self.factors}")
        if self.factors > self.instances - 1:
            raise InvalidConfig(
                f"factors ({self.factors}) must be <= instances - 1 ({self.instances - 1})"
            )
        for field in ("base_radius", "shape_coupling", "mesh_noise", "feature_base",
                      "feature_coupling", "feature_noise", "block_factor_noise"):
            v = getattr(self, field)
            if not np.isfinite(v):
                raise InvalidConfig(f"{field} must be finite")
        if self.mesh_noise < 0 or self.feature_noise < 0 or self.block_factor_noise < 0:
            raise InvalidConfig("noise scales must be >= 0")
        recipes = self.resolved_recipes()
        names = [r.spec.name for r in recipes]
        if VOLUME_NAME in names:
            raise InvalidConfig(f"{VOLUME_NAME!r} is computed, not generated")
        if len(set(names)) != len(names):
            raise InvalidConfig("duplicate indicator names in recipes")
        for r in recipes:
            r.validate(self.factors)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """What the generator knows: factors, affine loadings, noise scales.

    loadings[i] is the affine coefficient row of component i with respect to
    the shared factors, on the scale where the component (or its monotone
    transform) equals loading . factors + noise_scale * eps. affine_mask marks
    rows where that relation is exact (the computed volume indicator is only
    approximate, via linearization at the factor origin). Block-level factor
    jitter (``block_factor_noise``) is structured residual variation shared
    within a block; it is not represented in loadings or noise_scales, so
    oracle tests of the affine relation should set it to zero.
    """

    factors: np.ndarray
    loadings: np.ndarray
    noise_scales: np.ndarray
    affine_mask: np.ndarray

    def standardized_loadings(self) -> np.ndarray:
        """Loading rows scaled to unit total variance (the latent-space truth)."""
        s = np.sqrt((self.loadings**2).sum(axis=1) + self.noise_scales**2)
        s[s == 0] = 1.0
        return self.loadings / s[:, None]


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n, dtype=np.float64) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n)
    theta = np.pi * (1.0 + np.sqrt(5.0)) * i
    return np.column_stack(
        [np.sin(phi) * np.cos(theta), np.sin(phi) * np.sin(theta), np.cos(phi)]
    )


def _patterns(dirs: np.ndarray) -> np.ndarray:
    """Smooth spherical pattern bank (N, 9): real low-order harmonics."""
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    cols = [
        np.ones_like(z),
        z,
        x * y,
        x * x - y * y,
        x * z,
        y * z,
        3.0 * z * z - 1.0,
        x,
        y,
    ]
    return np.column_stack(cols)


# Per-factor coupling strength of each block, cycled over the factor index.
# Every block sees every factor, but none sees all of them at full strength,
# so no single block determines the factor vector and combining observed
# blocks is genuinely informative (the designed error-monotonicity pattern).
_SHAPE_CYCLE = (1.0, 0.4, 0.2)
_FEATURE_CYCLE = (0.2, 1.0, 0.4)


def _cycle_weights(cycle: tuple[float, ...], factor_count: int) -> np.ndarray:
    return np.array([cycle[i % len(cycle)] for i in range(factor_count)])


def generate_cohort(
    config: SyntheticConfig,
) -> tuple[list[TriangleMesh], list[np.ndarray], list[dict[str, float]], GroundTruth]:
    """Generate (meshes, features, indicator records, ground truth).

    Indicator records include the computed ``volume`` entry. Deterministic:
    identical config (seed included) gives identical output.
    """
    config.validate()
    m, n, j = config.instances, config.vertices, config.factors
    rng = np.random.default_rng([int(config.seed) & _MASK63, 92])
    factors = rng.standard_normal((m, j))

    # Each block reads its own jittered copy of the factor vector. The jitter
    # is shared across all components of a block, so it cannot be averaged
    # away within the block; only combining blocks reduces it. This is what
    # makes multi-block observation strictly more informative by design.
    tau = config.block_factor_noise
    f_shape = factors + tau * rng.standard_normal((m, j))
    f_feat = factors + tau * rng.standard_normal((m, j))
    f_ind = factors + tau * rng.standard_normal((m, j))

    dirs = _fibonacci_sphere(n)
    bank = _patterns(dirs)
    p = bank.shape[1]
    shape_pat = bank[:, np.arange(j) % p]          # (n, j)
    feat_pat = bank[:, (np.arange(j) + 1) % p]     # (n, j)
    shape_w = _cycle_weights(_SHAPE_CYCLE, j)
    feat_w = _cycle_weights(_FEATURE_CYCLE, j)

    mesh_eps = rng.standard_normal((m, n)) * config.mesh_noise
    radii = (
        config.base_radius
        + config.shape_coupling * (f_shape * shape_w) @ shape_pat.T
        + mesh_eps
    )

    faces = np.sort(ConvexHull(dirs).simplices.astype(np.int64), axis=1)
    faces = faces[np.lexsort((faces[:, 2], faces[:, 1], faces[:, 0]))]
    meshes = [TriangleMesh(dirs * radii[k][:, None], faces) for k in range(m)]

    feat_eps = rng.standard_normal((m, n)) * config.feature_noise
    log_f = (
        config.feature_base
        + config.feature_coupling * (f_feat * feat_w) @ feat_pat.T
        + feat_eps
    )
    features = [np.exp(log_f[k]) for k in range(m)]

    recipes = config.resolved_recipes()
    records: list[dict[str, float]] = [{} for _ in range(m)]
    for recipe in recipes:
        g = f_ind @ np.asarray(recipe.weights) + rng.standard_normal(m) * recipe.noise
        if recipe.spec.is_continuous:
            values = recipe.offset + recipe.scale * g
        else:
            levels = np.asarray(recipe.spec.ordinal_levels, dtype=np.float64)
            values = levels[np.digitize(g, np.asarray(recipe.cuts))]
        for k in range(m):
            records[k][recipe.spec.name] = float(values[k])
    for k in range(m):
        records[k][VOLUME_NAME] = float(features[k].sum())

    # ground-truth affine structure, ordered like the instance vector
    d = 4 * n + len(recipes) + 1
    loadings = np.zeros((d, j))
    noise = np.zeros(d)
    coord = (
        dirs[:, :, None] * (config.shape_coupling * shape_pat * shape_w)[:, None, :]
    ).reshape(3 * n, j)
    loadings[: 3 * n] = coord
    noise[: 3 * n] = np.abs(dirs).reshape(3 * n) * config.mesh_noise
    loadings[3 * n : 4 * n] = config.feature_coupling * feat_pat * feat_w
    noise[3 * n : 4 * n] = config.feature_noise
    affine = np.ones(d, dtype=bool)
    for i, recipe in enumerate(recipes):
        loadings[4 * n + i] = recipe.weights
        noise[4 * n + i] = recipe.noise
    # volume ~ sum_v exp(base) * coupling * feat_pat[v] at the factor origin
    mean_feat = np.exp(config.feature_base)
    loadings[d - 1] = mean_feat * config.feature_coupling * (feat_pat * feat_w).sum(axis=0)
    noise[d - 1] = mean_feat * config.feature_noise * np.sqrt(n)
    affine[d - 1] = False

    truth = GroundTruth(
        factors=factors, loadings=loadings, noise_scales=noise, affine_mask=affine
    )
    return meshes, features, records, truth


def indicator_specs_for(config: SyntheticConfig) -> tuple[VariableSpec, ...]:
    """The indicator spec panel of a config: recipe specs plus computed volume."""
    return tuple(r.spec for r in config.resolved_recipes()) + (
        VariableSpec(name=VOLUME_NAME, kind=Kind.CONTINUOUS, block=Block.INDICATOR),
    )


def generate_matrix(config: SyntheticConfig) -> tuple[Cohort, GroundTruth]:
    """Generate the cohort directly as a Cohort (no files)."""
    meshes, features, records, truth = generate_cohort(config)
    indicator_specs = indicator_specs_for(config)
    specs = build_component_specs(config.vertices, indicator_specs)
    layout = InstanceLayout(
        vertex_count=config.vertices, indicator_count=len(indicator_specs)
    )
    ids = tuple(_instance_id(k, config.instances) for k in range(config.instances))
    names = [s.name for s in indicator_specs]
    columns = [
        vectorize(meshes[k], features[k], [records[k][nm] for nm in names], layout)
        for k in range(config.instances)
    ]
    cohort = Cohort(
        Y=np.column_stack(columns),
        specs=specs,
        layout=layout,
        faces=meshes[0].faces,
        ids=ids,
    )
    return cohort, truth


def _instance_id(k: int, total: int) -> str:
    width = max(4, len(str(total - 1)))
    return f"inst{k:0{width}d}"


def write_cohort(config: SyntheticConfig, out_dir: str | Path) -> tuple[Path, Path]:
    """Write mesh/feature files and the indicator table; returns their paths.

    The ``volume`` column is intentionally omitted from the table so loading
    exercises the computed-volume path; all other indicators are written.
    """
    meshes, features, records, _ = generate_cohort(config)
    out_dir = Path(out_dir)
    mesh_dir = out_dir / "meshes"
    mesh_dir.mkdir(parents=True, exist_ok=True)
    names = [r.spec.name for r in config.resolved_recipes()]
    rows: dict[str, dict[str, float]] = {}
    for k, (mesh, feat) in enumerate(zip(meshes, features)):
        rid = _instance_id(k, config.instances)
        write_mesh(mesh_dir / f"{rid}.csm1", mesh)
        write_feature_field(mesh_dir / f"{rid}.feat", feat)
        rows[rid] = {nm: records[k][nm] for nm in names}
    table = out_dir / "indicators.csv"
    write_indicator_table(table, names, rows)
    return mesh_dir, table
