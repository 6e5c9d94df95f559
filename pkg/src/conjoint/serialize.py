"""Model serialization: canonical JSON text and compact binary, losslessly
convertible in both directions.

Text form: a canonical JSON document (sorted keys, fixed indentation). Floats
are emitted through repr, which round-trips float64 exactly, so the text form
is lossless and byte-deterministic for a given model.

Binary form: magic ``CJMB``, a version byte, an 8-byte little-endian header
length, a canonical JSON header in which each numeric array is replaced by a
``{"__blob__": i}`` reference, then the raw little-endian array buffers in
reference order.

Empirical marginals are stored as their full sorted value lists; plotting
positions are a fixed function r/(M+1) of the list length and are not stored.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import FormatError
from .marginals import EmpiricalMarginal, GaussianMarginal, MarginalModel
from .meshdata import InstanceLayout
from .model import JointModel, LatentGaussian
from .specs import VariableSpec

__all__ = ["save_model", "load_model", "model_to_bytes", "model_from_bytes"]

FORMAT_VERSION = 1
_MAGIC = b"CJMB"
_DOCUMENT_KIND = "conjoint-model"


def _marginal_payload(m: MarginalModel) -> dict:
    if isinstance(m.variant, GaussianMarginal):
        return {"variant": "gaussian", "mean": m.variant.mean, "stddev": m.variant.stddev}
    return {"variant": "empirical", "values": m.variant.values}


def _marginal_from_payload(data: Mapping, spec: VariableSpec) -> MarginalModel:
    variant = data.get("variant")
    if variant == "gaussian":
        return MarginalModel(spec=spec, variant=GaussianMarginal(float(data["mean"]), float(data["stddev"])))
    if variant == "empirical":
        values = np.asarray(data["values"], dtype=np.float64)
        positions = np.arange(1, values.size + 1, dtype=np.float64) / (values.size + 1)
        return MarginalModel(spec=spec, variant=EmpiricalMarginal(values, positions))
    raise FormatError(f"unknown marginal variant {variant!r}")


def _model_payload(model: JointModel) -> dict:
    """Model as a JSON-shaped dict; numeric arrays stay numpy arrays."""
    return {
        "format_version": FORMAT_VERSION,
        "kind": _DOCUMENT_KIND,
        "specs": [s.to_dict() for s in model.specs],
        "marginals": [_marginal_payload(m) for m in model.marginals],
        "latent": {
            "mean": model.latent.mean,
            "basis": model.latent.basis,
            "eigenvalues": model.latent.eigenvalues,
            "jitter": model.latent.jitter,
        },
        "layout": model.layout.to_dict() if model.layout is not None else None,
        "metadata": dict(model.metadata),
    }


def _model_from_payload(data: Mapping) -> JointModel:
    try:
        version = data["format_version"]
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported format_version {version!r}")
        if data.get("kind") != _DOCUMENT_KIND:
            raise FormatError(f"not a model document (kind={data.get('kind')!r})")
        specs = tuple(VariableSpec.from_dict(s) for s in data["specs"])
        if len(data["marginals"]) != len(specs):
            raise FormatError("spec and marginal counts differ")
        marginals = tuple(
            _marginal_from_payload(m, s) for m, s in zip(data["marginals"], specs)
        )
        lat = data["latent"]
        latent = LatentGaussian(
            mean=np.asarray(lat["mean"], dtype=np.float64),
            basis=np.asarray(lat["basis"], dtype=np.float64).reshape(
                len(specs), -1
            ),
            eigenvalues=np.asarray(lat["eigenvalues"], dtype=np.float64),
            jitter=float(lat["jitter"]),
        )
        layout = data.get("layout")
        return JointModel(
            specs=specs,
            marginals=marginals,
            latent=latent,
            layout=InstanceLayout.from_dict(layout) if layout is not None else None,
            metadata=dict(data.get("metadata", {})),
        )
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model document: {exc}") from None


# ---------------------------------------------------------------------------
# text form


def _to_jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _text_bytes(model: JointModel) -> bytes:
    doc = _to_jsonable(_model_payload(model))
    return (json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# binary form


def _extract_blobs(obj, blobs: list[np.ndarray]):
    if isinstance(obj, np.ndarray):
        blobs.append(np.ascontiguousarray(obj))
        return {"__blob__": len(blobs) - 1}
    if isinstance(obj, dict):
        return {k: _extract_blobs(v, blobs) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_extract_blobs(v, blobs) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _restore_blobs(obj, blobs: list[np.ndarray]):
    if isinstance(obj, dict):
        if "__blob__" in obj:
            return blobs[obj["__blob__"]]
        return {k: _restore_blobs(v, blobs) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore_blobs(v, blobs) for v in obj]
    return obj


def _binary_bytes(model: JointModel) -> bytes:
    blobs: list[np.ndarray] = []
    header = _extract_blobs(_model_payload(model), blobs)
    header["blobs"] = [
        {"dtype": b.dtype.newbyteorder("<").str, "shape": list(b.shape)} for b in blobs
    ]
    head = json.dumps(header, sort_keys=True, separators=(",", ":"), allow_nan=False).encode(
        "utf-8"
    )
    parts = [_MAGIC, bytes([FORMAT_VERSION]), len(head).to_bytes(8, "little"), head]
    for b in blobs:
        parts.append(b.astype(b.dtype.newbyteorder("<"), copy=False).tobytes())
    return b"".join(parts)


def _parse_binary(raw: bytes) -> JointModel:
    if len(raw) < 13 or raw[:4] != _MAGIC:
        raise FormatError("not a binary model file (bad magic)")
    if raw[4] != FORMAT_VERSION:
        raise FormatError(f"unsupported binary format version {raw[4]}")
    head_len = int.from_bytes(raw[5:13], "little")
    if len(raw) < 13 + head_len:
        raise FormatError("truncated binary model file (header)")
    try:
        header = json.loads(raw[13 : 13 + head_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"malformed binary header: {exc}") from None
    offset = 13 + head_len
    blobs: list[np.ndarray] = []
    for entry in header.get("blobs", []):
        dtype = np.dtype(entry["dtype"])
        shape = tuple(int(s) for s in entry["shape"])
        nbytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if shape else dtype.itemsize
        if len(raw) < offset + nbytes:
            raise FormatError("truncated binary model file (arrays)")
        arr = np.frombuffer(raw, dtype=dtype, count=int(np.prod(shape, dtype=np.int64)), offset=offset)
        blobs.append(arr.reshape(shape).astype(dtype.newbyteorder("="), copy=True))
        offset += nbytes
    header.pop("blobs", None)
    return _model_from_payload(_restore_blobs(header, blobs))


# ---------------------------------------------------------------------------
# public API


def model_to_bytes(model: JointModel, form: str = "text") -> bytes:
    """Serialize to bytes; form is ``"text"`` or ``"binary"``."""
    if form == "text":
        return _text_bytes(model)
    if form == "binary":
        return _binary_bytes(model)
    raise FormatError(f"unknown serialization form {form!r}")


def model_from_bytes(raw: bytes) -> JointModel:
    """Parse either serialization form (sniffed from the magic bytes)."""
    if raw[:4] == _MAGIC:
        return _parse_binary(raw)
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"not a model file: {exc}") from None
    return _model_from_payload(doc)


def save_model(model: JointModel, path: str | Path, form: str | None = None) -> None:
    """Write a model file atomically (temp file + rename).

    When ``form`` is None it is inferred from the suffix: ``.cjm`` binary,
    anything else text.
    """
    path = Path(path)
    if form is None:
        form = "binary" if path.suffix == ".cjm" else "text"
    payload = model_to_bytes(model, form)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def load_model(path: str | Path) -> JointModel:
    """Load a model file in either form."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return model_from_bytes(raw)
