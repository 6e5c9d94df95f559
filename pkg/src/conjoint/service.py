"""Condition reports and the HTTP explorer service.

build_condition_report is the single computation behind both the ``condition``
CLI subcommand and the service POST /condition, so the two emit byte-identical
documents for identical inputs and seed. The service itself is a stateless
stdlib ThreadingHTTPServer over one immutable loaded model: every request owns
its RNG (seeded from the request, default 0), so identical requests return
identical bodies regardless of concurrency.

Endpoints: GET /model/meta, POST /condition, GET /mode?k=&t=, GET /sample.
All payloads are canonical JSON (sorted keys, lossless shortest round-trip
decimals). The wire schema is documented in docs/api.md.
"""

from __future__ import annotations

import json
import mimetypes
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Mapping, Sequence, Union

import numpy as np

from .benchmark import histogram_masses
from .errors import (
    ConjointError,
    InvalidInput,
    InvalidLevel,
    InvalidTask,
    SingularConditioning,
)
from .marginals import EmpiricalMarginal, GaussianMarginal
from .model import (
    ConditionalModel,
    JointModel,
    condition,
    observation_from_values,
    predict,
    principal_mode_instance,
    sample_latent_rows,
    truncate_latent,
)
from .specs import Block

__all__ = [
    "build_condition_report",
    "canonical_json",
    "model_meta",
    "mode_report",
    "sample_report",
    "resolve_assignments",
    "make_server",
]

_MASK63 = (1 << 63) - 1
_VOLUME = "volume"
_BLOCK_KEYS = tuple(b.value for b in Block)
_HIST_STREAM = 101
_SAMPLE_STREAM = 11


class _BadRequest(Exception):
    """Malformed wire input (HTTP 400); never raised by the library layer."""


# ---------------------------------------------------------------------------
# canonical JSON


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    return x


def canonical_json(obj) -> bytes:
    """Deterministic JSON bytes: sorted keys, indent 1, lossless floats."""
    text = json.dumps(_plain(obj), sort_keys=True, indent=1, allow_nan=False)
    return (text + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# assignment parsing


def resolve_assignments(
    model: JointModel, raw: Mapping[str, object]
) -> dict[str, float]:
    """Map name -> value assignments to floats, accepting level labels.

    A string value must be either a declared label for the variable (e.g.
    ``"male"``) or parse as a decimal number. Unknown names and unknown labels
    raise InvalidLevel; admissibility of the numeric value itself is checked
    later when the observation is built.
    """
    out: dict[str, float] = {}
    for name, value in raw.items():
        i = model.index_of(name)
        spec = model.specs[i]
        if isinstance(value, str):
            if spec.labels is not None and value in spec.labels:
                out[name] = float(spec.ordinal_levels[spec.labels.index(value)])
                continue
            try:
                out[name] = float(value)
            except ValueError:
                raise InvalidLevel(
                    f"{name}: {value!r} is not a level label or a number"
                ) from None
        elif isinstance(value, (int, float, np.integer, np.floating)):
            out[name] = float(value)
        else:
            raise InvalidInput(f"{name}: value must be a number or a level label")
    return out


# ---------------------------------------------------------------------------
# condition report


def _truncated(model: JointModel, rank: int) -> JointModel:
    sub = truncate_latent(model.latent, rank)
    if sub is model.latent:
        return model
    trunc = JointModel(
        specs=model.specs,
        marginals=model.marginals,
        latent=sub,
        layout=model.layout,
        metadata=model.metadata,
    )
    trunc._cache["tables"] = model.tables  # marginals unchanged: reuse tables
    return trunc


def _indicator_items(model: JointModel, vector: np.ndarray) -> dict[str, float]:
    return {
        s.name: float(vector[i])
        for i, s in enumerate(model.specs)
        if s.block is Block.INDICATOR
    }


def _instance_dict(model: JointModel, vector: np.ndarray) -> dict:
    layout = model.layout
    out = {"indicators": _indicator_items(model, vector)}
    if layout is None:
        out["vertices"] = None
        out["features"] = None
        out["components"] = {s.name: float(vector[i]) for i, s in enumerate(model.specs)}
    else:
        n = layout.vertex_count
        out["vertices"] = vector[layout.coordinate_slice].reshape(n, 3).tolist()
        out["features"] = vector[layout.feature_slice].tolist()
        out["components"] = None
    return out


def _stddev_dict(model: JointModel, stddev: np.ndarray) -> dict:
    layout = model.layout
    out = {"indicator": _indicator_items(model, stddev)}
    if layout is None:
        out["vertex"] = None
        out["feature"] = None
        out["components"] = {s.name: float(stddev[i]) for i, s in enumerate(model.specs)}
    else:
        n = layout.vertex_count
        coords = stddev[layout.coordinate_slice].reshape(n, 3)
        out["vertex"] = np.sqrt((coords**2).sum(axis=1)).tolist()
        out["feature"] = stddev[layout.feature_slice].tolist()
        out["components"] = None
    return out


def _mode_entries(
    model: JointModel, target: Union[JointModel, ConditionalModel], count: int
) -> list[dict]:
    if count < 1:
        return []
    if isinstance(target, ConditionalModel):
        k = min(count, target.rank)
        variances, basis = target.top_modes(k)
        center = target.posterior_mean
    else:
        k = min(count, target.latent.rank)
        variances = target.latent.eigenvalues[:k]
        basis = target.latent.basis[:, :k]
        center = target.latent.mean
    X = np.concatenate(
        [center[:, None], center[:, None] + basis * np.sqrt(variances)[None, :]], axis=1
    )
    D = model.tables.inverse_matrix(X)
    base = D[:, 0]
    layout = model.layout
    entries = []
    for j in range(k):
        delta = D[:, 1 + j] - base
        entry = {"k": j + 1, "eigenvalue": float(variances[j])}
        if layout is None:
            entry["displacement"] = None
            entry["feature_delta"] = None
            entry["delta"] = delta.tolist()
        else:
            n = layout.vertex_count
            entry["displacement"] = delta[layout.coordinate_slice].reshape(n, 3).tolist()
            entry["feature_delta"] = delta[layout.feature_slice].tolist()
            entry["delta"] = None
        entry["indicator_delta"] = _indicator_items(model, delta)
        entries.append(entry)
    return entries


def _histograms(
    model: JointModel,
    target: Union[JointModel, ConditionalModel],
    samples: int,
    bins: int,
    seed: int,
) -> dict[str, dict]:
    names = [s.name for s in model.specs if s.block is Block.INDICATOR]
    if samples < 1 or not names:
        return {}
    rows = np.array([model.index_of(n) for n in names], dtype=np.intp)
    rng = np.random.default_rng([int(seed) & _MASK63, _HIST_STREAM])
    lat = sample_latent_rows(target, rows, samples, rng)
    data = model.tables.inverse_rows(rows, lat.T)
    out = {}
    for j, name in enumerate(names):
        values = data[j]
        scale = "value"
        if name == _VOLUME:
            values = np.log(np.maximum(values, np.finfo(np.float64).tiny))
            scale = "log"
        edges, masses = histogram_masses(values, bins)
        out[name] = {"scale": scale, "edges": list(edges), "masses": list(masses)}
    return out


def build_condition_report(
    model: JointModel,
    assignments: Mapping[str, object] | None = None,
    sigma: float | Mapping[str, float] = 0.0,
    samples: int = 1000,
    modes: int = 3,
    bins: int = 30,
    seed: int = 0,
    rank: int | None = None,
) -> dict:
    """The full conditioning summary served by POST /condition.

    Empty assignments summarize the unconditional model. sigma is a scalar
    or a per-block mapping of observation noise. rank optionally truncates
    the prior to its leading eigenpairs before conditioning (latency knob).
    Deterministic for fixed inputs and seed.
    """
    samples = int(samples)
    modes = int(modes)
    bins = int(bins)
    seed = int(seed)
    if samples < 0:
        raise InvalidInput(f"samples must be >= 0, got {samples}")
    if modes < 0:
        raise InvalidInput(f"modes must be >= 0, got {modes}")
    if bins < 1:
        raise InvalidInput(f"bins must be >= 1, got {bins}")
    if isinstance(sigma, Mapping):
        block_sigma = {str(k): float(v) for k, v in sigma.items()}
        for key, value in block_sigma.items():
            if key not in _BLOCK_KEYS:
                raise InvalidInput(f"unknown sigma block {key!r}")
            if not np.isfinite(value) or value < 0:
                raise InvalidInput(
                    f"sigma[{key!r}] must be finite and >= 0, got {value!r}"
                )
        scalar_sigma = 0.0
    else:
        scalar_sigma = float(sigma)
        if not np.isfinite(scalar_sigma) or scalar_sigma < 0:
            raise InvalidInput(f"sigma must be finite and >= 0, got {sigma!r}")
        block_sigma = {}
    effective_sigma = {k: block_sigma.get(k, scalar_sigma) for k in _BLOCK_KEYS}

    if rank is not None:
        model = _truncated(model, rank)
    resolved = resolve_assignments(model, assignments or {})
    if resolved:
        obs = observation_from_values(model, resolved, sigma=scalar_sigma, block_sigma=block_sigma)
        target: Union[JointModel, ConditionalModel] = condition(model, obs)
        predicted = target.posterior_instance()
        variance = target.diagonal()
    else:
        target = model
        predicted = predict(model)
        variance = model.latent.diagonal()
    stddev = np.sqrt(np.maximum(variance, 0.0))

    return {
        "kind": "condition-report",
        "request": {
            "assignments": resolved,
            "sigma": effective_sigma,
            "samples": samples,
            "modes": modes,
            "bins": bins,
            "seed": seed,
            "rank": None if rank is None else int(rank),
        },
        "observed": sorted(resolved),
        "prediction": _instance_dict(model, predicted),
        "stddev": _stddev_dict(model, stddev),
        "modes": _mode_entries(model, target, modes),
        "histograms": _histograms(model, target, samples, bins, seed),
    }


# ---------------------------------------------------------------------------
# meta / mode / sample reports


def _admissible(model: JointModel, i: int) -> dict:
    m = model.marginals[i]
    levels = m.admissible_levels()
    if levels is not None:
        return {"levels": [float(v) for v in levels]}
    if isinstance(m.variant, GaussianMarginal):
        mu, sd = m.variant.mean, m.variant.stddev
        return {"min": float(mu - 3 * sd), "max": float(mu + 3 * sd)}
    if isinstance(m.variant, EmpiricalMarginal):
        return {"min": float(m.variant.values[0]), "max": float(m.variant.values[-1])}
    return {}


def _spec_entry(model: JointModel, i: int) -> dict:
    s = model.specs[i]
    return {
        "name": s.name,
        "kind": s.kind.value,
        "block": s.block.value,
        "marginal": s.marginal.value,
        "levels": None if s.ordinal_levels is None else list(s.ordinal_levels),
        "labels": None if s.labels is None else list(s.labels),
        "admissible": _admissible(model, i),
    }


def model_meta(model: JointModel) -> dict:
    """GET /model/meta payload: sizes, specs with admissible ranges, topology."""
    layout = model.layout
    lat = model.latent
    meta = dict(model.metadata)
    if layout is None:
        entries = [_spec_entry(model, i) for i in range(len(model.specs))]
        vertex_count = 0
        indicator_count = sum(1 for s in model.specs if s.block is Block.INDICATOR)
    else:
        entries = [
            _spec_entry(model, i)
            for i, s in enumerate(model.specs)
            if s.block is Block.INDICATOR
        ]
        n = layout.vertex_count
        entries.append(
            {"name": "shape", "kind": "block-summary", "block": "coordinate", "count": 3 * n}
        )
        entries.append(
            {"name": "feature", "kind": "block-summary", "block": "feature", "count": n}
        )
        vertex_count = n
        indicator_count = layout.indicator_count
    return {
        "kind": "model-meta",
        "dimension": model.dimension,
        "vertex_count": vertex_count,
        "indicator_count": indicator_count,
        "rank": lat.rank,
        "jitter": float(lat.jitter),
        "training_size": meta.get("training_size"),
        "topology_checksum": meta.get("topology_checksum"),
        "faces": meta.get("faces"),
        "eigenvalues": lat.eigenvalues.tolist(),
        "specs": entries,
    }


def mode_report(model: JointModel, k: int, t: float) -> dict:
    """GET /mode payload: the instance at mean + t sqrt(lambda_k) u_k."""
    instance = principal_mode_instance(model, k, t)
    k = int(k)
    eigenvalue = float(model.latent.eigenvalues[k - 1])
    return {
        "kind": "mode-instance",
        "k": k,
        "t": float(t),
        "eigenvalue": eigenvalue,
        "latent_norm": abs(float(t)) * float(np.sqrt(eigenvalue)),
        "instance": _instance_dict(model, instance),
    }


def sample_report(
    model: JointModel,
    variables: Sequence[str] | None = None,
    n: int = 100,
    seed: int = 0,
) -> dict:
    """GET /sample payload: n draws of the requested variables (column-wise)."""
    if n < 1:
        raise InvalidInput(f"sample count must be >= 1, got {n}")
    if variables is None:
        variables = [s.name for s in model.specs if s.block is Block.INDICATOR]
        if not variables:
            variables = list(model.names)
    name_to_index = {s.name: i for i, s in enumerate(model.specs)}
    for v in variables:
        if v not in name_to_index:
            raise InvalidTask(f"unknown variable {v!r}")
    rows = np.array([name_to_index[v] for v in variables], dtype=np.intp)
    rng = np.random.default_rng([int(seed) & _MASK63, _SAMPLE_STREAM])
    lat = sample_latent_rows(model, rows, int(n), rng)
    data = model.tables.inverse_rows(rows, lat.T)
    return {
        "kind": "sample-table",
        "n": int(n),
        "seed": int(seed),
        "variables": list(variables),
        "values": {v: data[j].tolist() for j, v in enumerate(variables)},
    }


# ---------------------------------------------------------------------------
# HTTP layer


def _http_status(exc: ConjointError) -> int:
    if isinstance(exc, SingularConditioning):
        return 409
    return 422


class _ExplorerHandler(BaseHTTPRequestHandler):
    """One request; the model and precomputed meta live on the subclass."""

    model: JointModel = None
    ui_dir: Path | None = None
    meta_bytes: bytes = b"{}"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        pass  # quiet by design: the CLI prints the listening line

    # -- plumbing ----------------------------------------------------------

    def _send_bytes(self, status: int, body: bytes, ctype: str) -> None:
        self.send_response(status)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Content-Type", ctype)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, obj) -> None:
        self._send_bytes(status, canonical_json(obj), "application/json; charset=utf-8")

    def _send_error(self, status: int, error: str, message: str) -> None:
        self._send_json(status, {"kind": "error", "error": error, "message": message})

    def _run(self, fn) -> None:
        try:
            fn()
        except _BadRequest as e:
            self._send_error(400, "BadRequest", str(e))
        except ConjointError as e:
            self._send_error(_http_status(e), type(e).__name__, str(e))
        except BrokenPipeError:
            pass
        except Exception as e:  # pragma: no cover - defensive
            self._send_error(500, type(e).__name__, str(e))

    # -- query helpers -------------------------------------------------------

    @staticmethod
    def _q_int(qs: dict, key: str, default: int | None) -> int:
        if key not in qs:
            if default is None:
                raise _BadRequest(f"missing query parameter {key!r}")
            return default
        try:
            return int(qs[key][0])
        except ValueError:
            raise _BadRequest(f"query parameter {key!r} must be an integer") from None

    @staticmethod
    def _q_float(qs: dict, key: str, default: float | None) -> float:
        if key not in qs:
            if default is None:
                raise _BadRequest(f"missing query parameter {key!r}")
            return default
        try:
            return float(qs[key][0])
        except ValueError:
            raise _BadRequest(f"query parameter {key!r} must be a number") from None

    # -- routes --------------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        from urllib.parse import parse_qs, urlparse

        parsed = urlparse(self.path)
        qs = parse_qs(parsed.query)

        def handle():
            if parsed.path == "/model/meta":
                self._send_bytes(200, self.meta_bytes, "application/json; charset=utf-8")
            elif parsed.path == "/mode":
                k = self._q_int(qs, "k", None)
                t = self._q_float(qs, "t", None)
                self._send_json(200, mode_report(self.model, k, t))
            elif parsed.path == "/sample":
                n = self._q_int(qs, "n", 100)
                seed = self._q_int(qs, "seed", 0)
                variables = None
                if "variables" in qs:
                    variables = [v for v in qs["variables"][0].split(",") if v]
                self._send_json(200, sample_report(self.model, variables, n, seed))
            elif self.ui_dir is not None:
                self._static(parsed.path)
            else:
                self._send_error(404, "NotFound", f"no route {parsed.path!r}")

        self._run(handle)

    def do_POST(self):
        def handle():
            if self.path.split("?", 1)[0] != "/condition":
                self._send_error(404, "NotFound", f"no route {self.path!r}")
                return
            try:
                length = int(self.headers.get("Content-Length", "0") or "0")
            except ValueError:
                raise _BadRequest("invalid Content-Length") from None
            raw = self.rfile.read(length)
            try:
                body = json.loads(raw.decode("utf-8") or "{}")
            except (UnicodeDecodeError, json.JSONDecodeError) as e:
                raise _BadRequest(f"body is not valid JSON: {e}") from None
            if not isinstance(body, dict):
                raise _BadRequest("body must be a JSON object")
            assignments = body.get("assignments", {})
            if not isinstance(assignments, dict):
                raise _BadRequest("assignments must be an object")
            sigma = body.get("sigma", 0.0)
            if not isinstance(sigma, (int, float, dict)):
                raise _BadRequest("sigma must be a number or a per-block object")
            if isinstance(sigma, dict) and not all(
                isinstance(v, (int, float)) for v in sigma.values()
            ):
                raise _BadRequest("sigma values must be numbers")

            def body_int(key: str, default: int) -> int:
                v = body.get(key, default)
                if isinstance(v, bool) or not isinstance(v, int):
                    raise _BadRequest(f"{key} must be an integer")
                return v

            rank = body.get("rank")
            if rank is not None and (isinstance(rank, bool) or not isinstance(rank, int)):
                raise _BadRequest("rank must be an integer or null")
            report = build_condition_report(
                self.model,
                assignments=assignments,
                sigma=sigma,
                samples=body_int("samples", 1000),
                modes=body_int("modes", 3),
                bins=body_int("bins", 30),
                seed=body_int("seed", 0),
                rank=rank,
            )
            self._send_json(200, report)

        self._run(handle)

    # -- static UI -------------------------------------------------------------

    def _static(self, route: str) -> None:
        name = route.lstrip("/") or "index.html"
        base = self.ui_dir.resolve()
        target = (base / name).resolve()
        if not str(target).startswith(str(base)) or not target.is_file():
            self._send_error(404, "NotFound", f"no route {route!r}")
            return
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        self._send_bytes(200, target.read_bytes(), ctype)


def make_server(
    model: JointModel,
    host: str = "127.0.0.1",
    port: int = 8000,
    ui_dir: str | Path | None = None,
) -> ThreadingHTTPServer:
    """Build (but do not start) the explorer HTTP server for one model."""
    handler = type(
        "ExplorerHandler",
        (_ExplorerHandler,),
        {
            "model": model,
            "ui_dir": Path(ui_dir) if ui_dir is not None else None,
            "meta_bytes": canonical_json(model_meta(model)),
        },
    )
    server_cls = type(
        "ExplorerServer",
        (ThreadingHTTPServer,),
        # default backlog of 5 drops connections under concurrent clients
        {"request_queue_size": 128, "daemon_threads": True},
    )
    return server_cls((host, port), handler)
