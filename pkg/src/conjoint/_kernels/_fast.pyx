# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: hot per-element loops that numpy cannot batch across
per-row tables without Python-level iteration. Semantics match
conjoint._kernels._pure exactly."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

IMPLEMENTATION = "compiled"


def nearest_vertex_counts(points, vertices):
    cdef const double[:, ::1] p = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[:, ::1] v = np.ascontiguousarray(vertices, dtype=np.float64)
    cdef Py_ssize_t V = p.shape[0], N = v.shape[0]
    out = np.zeros(N, dtype=np.int64)
    cdef long long[::1] counts = out
    cdef Py_ssize_t i, j, best
    cdef double dx, dy, dz, d2, best_d2
    if N == 0:
        return out
    with nogil:
        for i in range(V):
            best = 0
            dx = p[i, 0] - v[0, 0]
            dy = p[i, 1] - v[0, 1]
            dz = p[i, 2] - v[0, 2]
            best_d2 = dx * dx + dy * dy + dz * dz
            for j in range(1, N):
                dx = p[i, 0] - v[j, 0]
                dy = p[i, 1] - v[j, 1]
                dz = p[i, 2] - v[j, 2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < best_d2:
                    best_d2 = d2
                    best = j
            counts[best] += 1
    return out


cdef inline Py_ssize_t _lower_bound(const double* a, Py_ssize_t n, double key) noexcept nogil:
    # first index with a[idx] >= key (searchsorted side='left')
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def interp_many(x, xp, fp, offsets):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] xpv = np.ascontiguousarray(xp, dtype=np.float64)
    cdef const double[::1] fpv = np.ascontiguousarray(fp, dtype=np.float64)
    cdef const long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t R = xv.shape[0], n = xv.shape[1]
    out = np.empty((R, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j, lo, m, k
    cdef double val, x0, x1, slope
    with nogil:
        for i in range(R):
            lo = <Py_ssize_t>off[i]
            m = <Py_ssize_t>off[i + 1] - lo
            for j in range(n):
                val = xv[i, j]
                if m == 1 or val <= xpv[lo]:
                    ov[i, j] = fpv[lo]
                elif val >= xpv[lo + m - 1]:
                    ov[i, j] = fpv[lo + m - 1]
                else:
                    k = _lower_bound(&xpv[lo], m, val)
                    # val > xp[lo] here, so k >= 1
                    if xpv[lo + k] == val:
                        ov[i, j] = fpv[lo + k]
                    else:
                        # same operation order as np.interp for bit equality
                        x0 = xpv[lo + k - 1]
                        x1 = xpv[lo + k]
                        slope = (fpv[lo + k] - fpv[lo + k - 1]) / (x1 - x0)
                        ov[i, j] = slope * (val - x0) + fpv[lo + k - 1]
    return out


def bucket_many(x, bounds, offsets):
    cdef const double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(bounds, dtype=np.float64)
    cdef const long long[::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t R = xv.shape[0], n = xv.shape[1]
    out = np.empty((R, n), dtype=np.int64)
    cdef long long[:, ::1] ov = out
    cdef Py_ssize_t i, j, lo, m
    with nogil:
        for i in range(R):
            lo = <Py_ssize_t>off[i]
            m = <Py_ssize_t>off[i + 1] - lo
            for j in range(n):
                if m == 0:
                    ov[i, j] = 0
                else:
                    ov[i, j] = <long long>_lower_bound(&bv[lo], m, xv[i, j])
    return out
