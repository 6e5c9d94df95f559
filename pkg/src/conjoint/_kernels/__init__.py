"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set ``CONJOINT_PURE=1`` to force the numpy kernels (used by the benchmark and
by tests that compare the two implementations).

All kernels require strictly increasing knot/boundary tables within each row.
"""

from __future__ import annotations

import os

from . import _pure

if os.environ.get("CONJOINT_PURE"):
    _impl = _pure
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _pure

IMPLEMENTATION: str = _impl.IMPLEMENTATION

nearest_vertex_counts = _impl.nearest_vertex_counts
interp_many = _impl.interp_many
bucket_many = _impl.bucket_many

__all__ = [
    "IMPLEMENTATION",
    "nearest_vertex_counts",
    "interp_many",
    "bucket_many",
]
