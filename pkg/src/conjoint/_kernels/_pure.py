"""Pure numpy kernels. Reference semantics for the compiled versions."""

from __future__ import annotations

import numpy as np

IMPLEMENTATION = "pure"

# Chunk size for the nearest-vertex distance matrix (keeps memory ~N*CHUNK*8).
_CHUNK = 4096


def nearest_vertex_counts(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Count, per vertex, the points whose nearest vertex it is.

    Exact Euclidean nearest neighbour; ties break toward the lowest vertex
    index (argmin over squared distances, first occurrence).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    counts = np.zeros(vertices.shape[0], dtype=np.int64)
    for start in range(0, points.shape[0], _CHUNK):
        chunk = points[start : start + _CHUNK]
        diff = chunk[:, None, :] - vertices[None, :, :]
        d2 = (diff * diff).sum(axis=2)
        nearest = np.argmin(d2, axis=1)
        counts += np.bincount(nearest, minlength=vertices.shape[0])
    return counts


def interp_many(
    x: np.ndarray, xp: np.ndarray, fp: np.ndarray, offsets: np.ndarray
) -> np.ndarray:
    """Row-wise piecewise-linear interpolation with per-row knot tables.

    Row ``i`` of ``x`` is interpolated over the knots
    ``xp[offsets[i]:offsets[i+1]] -> fp[offsets[i]:offsets[i+1]]``,
    clamped to the end values outside the knot range (np.interp semantics).
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        lo, hi = offsets[i], offsets[i + 1]
        out[i] = np.interp(x[i], xp[lo:hi], fp[lo:hi])
    return out


def bucket_many(x: np.ndarray, bounds: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Row-wise ``searchsorted(bounds_i, x, side='left')`` with per-row boundary tables.

    Returns, per entry, the index of the first interval whose upper boundary is
    >= x; entries above every boundary get the last index (len(bounds_i)).
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.shape, dtype=np.int64)
    for i in range(x.shape[0]):
        lo, hi = offsets[i], offsets[i + 1]
        out[i] = np.searchsorted(bounds[lo:hi], x[i], side="left")
    return out
