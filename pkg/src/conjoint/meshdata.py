"""Corresponded meshes, per-vertex features, indicators, and cohort loading.

An instance is a triangle mesh in vertex correspondence with the rest of the
cohort, a per-vertex scalar feature field, and K named indicators. Its vector
form has dimension d = 4N + K: the 3N coordinates interleaved per vertex as
(x, y, z), then the N feature values, then the indicators.

Feature fields and indicator records are represented as plain arrays and
mappings; the classes below carry only the structure that needs invariants
(mesh topology, layout index maps).

File formats (documented under External Interfaces in the README):

* mesh text format: line 1 ``CSM1 <N> <F>``, then N lines ``v x y z``, then
  F lines ``f i j k`` with 0-based vertex indices; ASCII OBJ and OFF are also
  accepted on read.
* per-instance features: ``<id>.feat`` with one value per line, or
  ``<id>.voxels`` with one ``x y z`` voxel center per line, turned into
  per-vertex counts by nearest-vertex assignment.
* indicators: UTF-8 delimiter-separated values (comma, semicolon or tab,
  sniffed from the header), first column ``id`` matching mesh file stems.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .errors import (
    CorrespondenceError,
    FormatError,
    InvalidInput,
    LayoutMismatch,
    MissingRecord,
)
from .specs import Block, Kind, MarginalKind, VariableSpec

__all__ = [
    "TriangleMesh",
    "InstanceLayout",
    "Cohort",
    "vectorize",
    "devectorize",
    "assign_voxels_to_vertices",
    "build_component_specs",
    "derive_layout",
    "read_mesh",
    "write_mesh",
    "read_feature_field",
    "write_feature_field",
    "read_voxel_centers",
    "write_voxel_centers",
    "read_indicator_table",
    "write_indicator_table",
    "load_cohort",
    "topology_checksum",
]

MESH_SUFFIXES = (".csm1", ".csm", ".obj", ".off")
VOLUME_NAME = "volume"


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """A triangle mesh: vertices in millimeters, faces as 0-based index triples."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(np.asarray(self.vertices, dtype=np.float64))
        f = np.array(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise InvalidInput("vertices must be an (N, 3) array")
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise InvalidInput("faces must be an (F, 3) array")
        if not np.all(np.isfinite(v)):
            raise InvalidInput("mesh vertices contain non-finite values")
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise InvalidInput("face index outside [0, N)")
        if f.size and (
            np.any(f[:, 0] == f[:, 1]) or np.any(f[:, 1] == f[:, 2]) or np.any(f[:, 0] == f[:, 2])
        ):
            raise InvalidInput("degenerate face (repeated vertex index)")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def vertex_count(self) -> int:
        return self.vertices.shape[0]

    @property
    def face_count(self) -> int:
        return self.faces.shape[0]


def topology_checksum(mesh_or_faces, vertex_count: int | None = None) -> str:
    """SHA-256 over (N, face list); equal iff topologies are byte-identical."""
    if isinstance(mesh_or_faces, TriangleMesh):
        faces = mesh_or_faces.faces
        vertex_count = mesh_or_faces.vertex_count
    else:
        faces = np.ascontiguousarray(mesh_or_faces, dtype=np.int64)
        if vertex_count is None:
            raise InvalidInput("vertex_count required when passing a face array")
    h = hashlib.sha256()
    h.update(b"CSM1")
    h.update(int(vertex_count).to_bytes(8, "little"))
    h.update(np.ascontiguousarray(faces, dtype=np.int64).tobytes())
    return h.hexdigest()


@dataclass(frozen=True)
class InstanceLayout:
    """Index map for the d = 4N + K instance vector."""

    vertex_count: int
    indicator_count: int

    def __post_init__(self):
        if self.vertex_count < 0 or self.indicator_count < 0:
            raise InvalidInput("layout counts must be non-negative")

    @property
    def dimension(self) -> int:
        return 4 * self.vertex_count + self.indicator_count

    @property
    def coordinate_slice(self) -> slice:
        return slice(0, 3 * self.vertex_count)

    @property
    def feature_slice(self) -> slice:
        return slice(3 * self.vertex_count, 4 * self.vertex_count)

    @property
    def indicator_slice(self) -> slice:
        return slice(4 * self.vertex_count, self.dimension)

    def block_indices(self, block: Block | str) -> np.ndarray:
        block = Block(block)
        sl = {
            Block.COORDINATE: self.coordinate_slice,
            Block.FEATURE: self.feature_slice,
            Block.INDICATOR: self.indicator_slice,
        }[block]
        return np.arange(sl.start, sl.stop, dtype=np.intp)

    def coordinate_index(self, vertex: int, axis: int) -> int:
        if not (0 <= vertex < self.vertex_count and 0 <= axis < 3):
            raise InvalidInput(f"no coordinate (vertex={vertex}, axis={axis})")
        return 3 * vertex + axis

    def to_dict(self) -> dict:
        return {"vertex_count": self.vertex_count, "indicator_count": self.indicator_count}

    @classmethod
    def from_dict(cls, data: Mapping) -> "InstanceLayout":
        return cls(int(data["vertex_count"]), int(data["indicator_count"]))


def build_component_specs(
    vertex_count: int,
    indicator_specs: Sequence[VariableSpec],
    coordinate_marginal: MarginalKind | str = MarginalKind.EMPIRICAL,
    feature_marginal: MarginalKind | str = MarginalKind.EMPIRICAL,
) -> tuple[VariableSpec, ...]:
    """Full d-component spec list: v{k}.x/y/z, f{k}, then the indicators."""
    for s in indicator_specs:
        if s.block is not Block.INDICATOR:
            raise InvalidInput(f"{s.name}: indicator spec has block {s.block.value!r}")
    cm = MarginalKind(coordinate_marginal)
    fm = MarginalKind(feature_marginal)
    specs: list[VariableSpec] = []
    for k in range(vertex_count):
        for axis in "xyz":
            specs.append(
                VariableSpec(
                    name=f"v{k}.{axis}",
                    kind=Kind.CONTINUOUS,
                    block=Block.COORDINATE,
                    marginal=cm,
                )
            )
    for k in range(vertex_count):
        specs.append(
            VariableSpec(
                name=f"f{k}", kind=Kind.CONTINUOUS, block=Block.FEATURE, marginal=fm
            )
        )
    specs.extend(indicator_specs)
    return tuple(specs)


def derive_layout(specs: Sequence[VariableSpec]) -> InstanceLayout | None:
    """Layout implied by a spec list, or None when it is not mesh-shaped.

    Mesh-shaped means: 3N coordinate components, then N feature components,
    then the indicators, in that order.
    """
    blocks = [s.block for s in specs]
    n_coord = sum(b is Block.COORDINATE for b in blocks)
    n_feat = sum(b is Block.FEATURE for b in blocks)
    n_ind = len(blocks) - n_coord - n_feat
    if n_coord % 3 != 0 or n_feat != n_coord // 3:
        return None
    expected = (
        [Block.COORDINATE] * n_coord + [Block.FEATURE] * n_feat + [Block.INDICATOR] * n_ind
    )
    if blocks != expected:
        return None
    return InstanceLayout(vertex_count=n_feat, indicator_count=n_ind)


# ---------------------------------------------------------------------------
# instance vectors


def vectorize(
    mesh: TriangleMesh,
    features: np.ndarray,
    indicators: Sequence[float],
    layout: InstanceLayout,
) -> np.ndarray:
    """Assemble the d = 4N + K instance vector (coordinates interleaved)."""
    if mesh.vertex_count != layout.vertex_count:
        raise LayoutMismatch(
            f"mesh has {mesh.vertex_count} vertices, layout expects {layout.vertex_count}"
        )
    feat = np.asarray(features, dtype=np.float64).ravel()
    if feat.size != layout.vertex_count:
        raise LayoutMismatch(
            f"{feat.size} feature values for {layout.vertex_count} vertices"
        )
    ind = np.asarray(indicators, dtype=np.float64).ravel()
    if ind.size != layout.indicator_count:
        raise LayoutMismatch(
            f"{ind.size} indicator values, layout expects {layout.indicator_count}"
        )
    out = np.empty(layout.dimension)
    out[layout.coordinate_slice] = mesh.vertices.ravel()
    out[layout.feature_slice] = feat
    out[layout.indicator_slice] = ind
    return out


def devectorize(
    vector: np.ndarray, layout: InstanceLayout
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split an instance vector into (vertices (N, 3), features, indicators).

    The face list is cohort topology, not part of the vector; pair the
    vertices with the cohort's shared faces to rebuild a TriangleMesh.
    """
    v = np.asarray(vector, dtype=np.float64).ravel()
    if v.size != layout.dimension:
        raise LayoutMismatch(f"vector length {v.size}, layout dimension {layout.dimension}")
    vertices = v[layout.coordinate_slice].reshape(layout.vertex_count, 3).copy()
    features = v[layout.feature_slice].copy()
    indicators = v[layout.indicator_slice].copy()
    return vertices, features, indicators


def assign_voxels_to_vertices(voxel_centers: np.ndarray, mesh: TriangleMesh) -> np.ndarray:
    """Per-vertex count of voxels whose exact nearest vertex it is.

    Ties break toward the lowest vertex index; the total count is conserved.
    """
    pts = np.asarray(voxel_centers, dtype=np.float64)
    if pts.size == 0:
        return np.zeros(mesh.vertex_count, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InvalidInput("voxel_centers must be a (V, 3) array")
    if not np.all(np.isfinite(pts)):
        raise InvalidInput("voxel centers contain non-finite values")
    counts = _kernels.nearest_vertex_counts(pts, mesh.vertices)
    return counts.astype(np.float64)


# ---------------------------------------------------------------------------
# mesh files


def _data_lines(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def _parse_csm1(lines: list[str], origin: str) -> TriangleMesh:
    head = lines[0].split()
    if len(head) != 3 or head[0] != "CSM1":
        raise FormatError(f"{origin}: expected header 'CSM1 <N> <F>'")
    try:
        n, f = int(head[1]), int(head[2])
    except ValueError:
        raise FormatError(f"{origin}: non-integer counts in header") from None
    if len(lines) != 1 + n + f:
        raise FormatError(
            f"{origin}: expected {1 + n + f} data lines, found {len(lines)}"
        )
    try:
        vertices = np.array(
            [[float(t) for t in line.split()[1:]] for line in lines[1 : 1 + n]]
        ).reshape(n, 3)
        faces = np.array(
            [[int(t) for t in line.split()[1:]] for line in lines[1 + n :]], dtype=np.int64
        ).reshape(f, 3)
    except ValueError:
        raise FormatError(f"{origin}: malformed vertex or face line") from None
    if any(not line.startswith("v ") for line in lines[1 : 1 + n]) or any(
        not line.startswith("f ") for line in lines[1 + n :]
    ):
        raise FormatError(f"{origin}: vertex lines must start with 'v', face lines with 'f'")
    return _build_mesh(vertices, faces, origin)


def _parse_obj(lines: list[str], origin: str) -> TriangleMesh:
    vertices, faces = [], []
    for line in lines:
        parts = line.split()
        if parts[0] == "v":
            if len(parts) < 4:
                raise FormatError(f"{origin}: vertex line with fewer than 3 coordinates")
            try:
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError:
                raise FormatError(f"{origin}: malformed vertex line {line!r}") from None
        elif parts[0] == "f":
            if len(parts) != 4:
                raise FormatError(f"{origin}: only triangle faces are supported")
            try:
                idx = [int(p.split("/")[0]) for p in parts[1:]]
            except ValueError:
                raise FormatError(f"{origin}: malformed face line {line!r}") from None
            if any(i < 1 for i in idx):
                raise FormatError(f"{origin}: face indices must be positive (1-based)")
            faces.append([i - 1 for i in idx])
    return _build_mesh(
        np.asarray(vertices, dtype=np.float64).reshape(len(vertices), 3),
        np.asarray(faces, dtype=np.int64).reshape(len(faces), 3),
        origin,
    )


def _parse_off(lines: list[str], origin: str) -> TriangleMesh:
    head = lines[0].split()
    if head[0] != "OFF":
        raise FormatError(f"{origin}: missing OFF header")
    if len(head) == 4:
        counts, body = head[1:], lines[1:]
    else:
        if len(lines) < 2:
            raise FormatError(f"{origin}: missing OFF counts line")
        counts, body = lines[1].split(), lines[2:]
    try:
        n, f = int(counts[0]), int(counts[1])
    except (ValueError, IndexError):
        raise FormatError(f"{origin}: malformed OFF counts") from None
    if len(body) != n + f:
        raise FormatError(f"{origin}: expected {n + f} data lines, found {len(body)}")
    try:
        vertices = np.array([[float(t) for t in line.split()[:3]] for line in body[:n]])
        faces = []
        for line in body[n:]:
            parts = [int(t) for t in line.split()]
            if parts[0] != 3 or len(parts) != 4:
                raise FormatError(f"{origin}: only triangle faces are supported")
            faces.append(parts[1:])
    except ValueError:
        raise FormatError(f"{origin}: malformed vertex or face line") from None
    return _build_mesh(
        vertices.reshape(n, 3), np.asarray(faces, dtype=np.int64).reshape(f, 3), origin
    )


def _build_mesh(vertices: np.ndarray, faces: np.ndarray, origin: str) -> TriangleMesh:
    try:
        return TriangleMesh(vertices, faces)
    except InvalidInput as exc:
        raise FormatError(f"{origin}: {exc}") from None


def read_mesh(path: str | Path) -> TriangleMesh:
    """Read a mesh file; format detected from the first line (CSM1/OBJ/OFF)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from None
    except UnicodeDecodeError:
        raise FormatError(f"{path}: not a UTF-8 text mesh file") from None
    lines = _data_lines(text)
    if not lines:
        raise FormatError(f"{path}: empty mesh file")
    first = lines[0].split()[0]
    if first == "CSM1":
        return _parse_csm1(lines, str(path))
    if first == "OFF":
        return _parse_off(lines, str(path))
    if first in ("v", "f", "vn", "vt", "g", "o", "mtllib", "usemtl", "s"):
        return _parse_obj(lines, str(path))
    raise FormatError(f"{path}: unrecognized mesh format (first token {first!r})")


def write_mesh(path: str | Path, mesh: TriangleMesh) -> None:
    """Write the canonical CSM1 text form (lossless float repr)."""
    lines = [f"CSM1 {mesh.vertex_count} {mesh.face_count}"]
    for x, y, z in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for i, j, k in mesh.faces:
        lines.append(f"f {int(i)} {int(j)} {int(k)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_feature_field(path: str | Path, vertex_count: int) -> np.ndarray:
    path = Path(path)
    lines = _data_lines(path.read_text(encoding="utf-8"))
    try:
        values = np.array([float(t) for t in lines], dtype=np.float64)
    except ValueError:
        raise FormatError(f"{path}: malformed feature value") from None
    if values.size != vertex_count:
        raise LayoutMismatch(
            f"{path}: {values.size} feature values for {vertex_count} vertices"
        )
    return values


def write_feature_field(path: str | Path, values: np.ndarray) -> None:
    Path(path).write_text(
        "\n".join(repr(float(v)) for v in np.asarray(values).ravel()) + "\n",
        encoding="utf-8",
    )


def read_voxel_centers(path: str | Path) -> np.ndarray:
    path = Path(path)
    lines = _data_lines(path.read_text(encoding="utf-8"))
    try:
        pts = np.array([[float(t) for t in line.split()] for line in lines])
    except ValueError:
        raise FormatError(f"{path}: malformed voxel line") from None
    if lines and (pts.ndim != 2 or pts.shape[1] != 3):
        raise FormatError(f"{path}: voxel lines must have exactly 3 coordinates")
    return pts.reshape(len(lines), 3)


def write_voxel_centers(path: str | Path, centers: np.ndarray) -> None:
    rows = np.asarray(centers, dtype=np.float64).reshape(-1, 3)
    Path(path).write_text(
        "\n".join(f"{float(x)!r} {float(y)!r} {float(z)!r}" for x, y, z in rows)
        + ("\n" if rows.size else ""),
        encoding="utf-8",
    )


# ---------------------------------------------------------------------------
# indicator tables


def _sniff_delimiter(header: str) -> str:
    for cand in ("\t", ";", ","):
        if cand in header:
            return cand
    return ","


def read_indicator_table(path: str | Path) -> tuple[list[str], dict[str, dict[str, float]]]:
    """Read a DSV indicator table -> (column names, {id -> {name -> value}}).

    The first column must be named ``id``; the delimiter (comma, semicolon or
    tab) is sniffed from the header line.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from None
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise FormatError(f"{path}: empty indicator table")
    delim = _sniff_delimiter(lines[0])
    header = [c.strip() for c in lines[0].split(delim)]
    if not header or header[0] != "id":
        raise FormatError(f"{path}: first column must be 'id', got {header[:1]!r}")
    names = header[1:]
    if len(set(names)) != len(names):
        raise FormatError(f"{path}: duplicate column names")
    rows: dict[str, dict[str, float]] = {}
    for ln, line in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in line.split(delim)]
        if len(cells) != len(header):
            raise FormatError(f"{path}:{ln}: expected {len(header)} cells, got {len(cells)}")
        rid = cells[0]
        if rid in rows:
            raise FormatError(f"{path}:{ln}: duplicate id {rid!r}")
        try:
            rows[rid] = {name: float(c) for name, c in zip(names, cells[1:])}
        except ValueError:
            raise FormatError(f"{path}:{ln}: non-numeric cell") from None
    return names, rows


def write_indicator_table(
    path: str | Path, names: Sequence[str], rows: Mapping[str, Mapping[str, float]]
) -> None:
    """Write a comma-separated indicator table, rows ordered by id."""
    lines = ["id," + ",".join(names)]
    for rid in sorted(rows):
        lines.append(rid + "," + ",".join(repr(float(rows[rid][n])) for n in names))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# cohort loading


@dataclass(frozen=True, eq=False)
class Cohort:
    """A loaded cohort: data matrix, specs, layout, shared topology."""

    Y: np.ndarray
    specs: tuple[VariableSpec, ...]
    layout: InstanceLayout
    faces: np.ndarray
    ids: tuple[str, ...]

    @property
    def topology_checksum(self) -> str:
        return topology_checksum(self.faces, self.layout.vertex_count)


def _mesh_paths(mesh_dir: Path) -> dict[str, Path]:
    found: dict[str, Path] = {}
    for p in sorted(mesh_dir.iterdir()):
        if p.suffix.lower() in MESH_SUFFIXES and p.is_file():
            if p.stem in found:
                raise FormatError(f"duplicate mesh id {p.stem!r} in {mesh_dir}")
            found[p.stem] = p
    return found


def load_cohort(
    mesh_dir: str | Path,
    indicators_file: str | Path,
    indicator_specs: Sequence[VariableSpec],
    coordinate_marginal: MarginalKind | str = MarginalKind.EMPIRICAL,
    feature_marginal: MarginalKind | str = MarginalKind.EMPIRICAL,
) -> Cohort:
    """Assemble Y (d x M) from a mesh directory and an indicator table.

    Meshes are matched to indicator rows by file stem = ``id``; instances are
    ordered by id (lexicographic). Every mesh needs feature data: either
    ``<id>.feat`` (per-vertex values) or ``<id>.voxels`` (voxel centers,
    assigned to nearest vertices). A ``volume`` indicator spec whose column
    is absent from the table is computed as the per-instance feature sum.

    Raises
    ------
    CorrespondenceError
        A mesh whose vertex count or face list differs from the first mesh.
    MissingRecord
        Mesh without indicator row / indicator row without mesh / missing
        feature data.
    FormatError
        Unparseable mesh, feature, voxel, or indicator file.
    """
    mesh_dir = Path(mesh_dir)
    if not mesh_dir.is_dir():
        raise FormatError(f"{mesh_dir}: not a directory")
    paths = _mesh_paths(mesh_dir)
    if not paths:
        raise InvalidInput(f"{mesh_dir}: no mesh files found")
    names, rows = read_indicator_table(indicators_file)

    ids = sorted(paths)
    missing_rows = [i for i in ids if i not in rows]
    if missing_rows:
        raise MissingRecord(f"no indicator row for mesh id(s) {missing_rows}")
    orphan_rows = sorted(set(rows) - set(ids))
    if orphan_rows:
        raise MissingRecord(f"indicator row(s) without mesh: {orphan_rows}")

    meshes = []
    reference: TriangleMesh | None = None
    for rid in ids:
        mesh = read_mesh(paths[rid])
        if reference is None:
            reference = mesh
        elif mesh.vertex_count != reference.vertex_count or not np.array_equal(
            mesh.faces, reference.faces
        ):
            raise CorrespondenceError(
                f"{paths[rid]}: topology differs from {paths[ids[0]]}"
            )
        meshes.append(mesh)

    n = reference.vertex_count
    features = []
    for j, rid in enumerate(ids):
        feat_path = mesh_dir / f"{rid}.feat"
        voxel_path = mesh_dir / f"{rid}.voxels"
        if feat_path.exists():
            features.append(read_feature_field(feat_path, n))
        elif voxel_path.exists():
            features.append(
                assign_voxels_to_vertices(read_voxel_centers(voxel_path), meshes[j])
            )
        else:
            raise MissingRecord(f"no feature data ({rid}.feat or {rid}.voxels) for {rid!r}")

    indicator_specs = tuple(indicator_specs)
    specs = build_component_specs(n, indicator_specs, coordinate_marginal, feature_marginal)
    layout = InstanceLayout(vertex_count=n, indicator_count=len(indicator_specs))

    columns = []
    for j, rid in enumerate(ids):
        values = []
        for s in indicator_specs:
            if s.name in rows[rid]:
                values.append(rows[rid][s.name])
            elif s.name == VOLUME_NAME:
                values.append(float(features[j].sum()))
            else:
                raise FormatError(f"{indicators_file}: missing column {s.name!r}")
        columns.append(vectorize(meshes[j], features[j], values, layout))
    Y = np.column_stack(columns)
    return Cohort(Y=Y, specs=specs, layout=layout, faces=reference.faces, ids=tuple(ids))
