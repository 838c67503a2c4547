# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled distance and selection kernels.

Same contract as numpy_impl: float64 accumulation over float32 inputs,
angular clamped at 0, (distance, id) tie order in top_k.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef extern from *:
    """
    #if defined(__GNUC__) || defined(__clang__)
    #define ANNB_POPCOUNT64(x) __builtin_popcountll(x)
    #else
    static int ANNB_POPCOUNT64(unsigned long long x) {
        int c = 0;
        while (x) { x &= x - 1; c++; }
        return c;
    }
    #endif
    """
    int ANNB_POPCOUNT64(unsigned long long x) nogil

EUCLIDEAN = 0
ANGULAR = 1

BACKEND_NAME = "c"


def dense_dists(cnp.float32_t[:, ::1] points, cnp.float32_t[::1] query,
                int metric_code):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t d = points.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, dot, sp, sq, diff, v
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] o = out

    if query.shape[0] != d:
        raise ValueError("dimension mismatch between query and points")

    if metric_code == EUCLIDEAN:
        with nogil:
            for i in range(n):
                acc = 0.0
                for j in range(d):
                    diff = <double> points[i, j] - <double> query[j]
                    acc += diff * diff
                o[i] = sqrt(acc)
        return out

    if metric_code == ANGULAR:
        sq = 0.0
        for j in range(d):
            sq += <double> query[j] * <double> query[j]
        if sq == 0.0:
            raise ValueError("zero-norm query vector under angular distance")
        for i in range(n):
            dot = 0.0
            sp = 0.0
            for j in range(d):
                dot += <double> points[i, j] * <double> query[j]
                sp += <double> points[i, j] * <double> points[i, j]
            if sp == 0.0:
                raise ValueError(
                    f"zero-norm vector under angular distance (row {i})"
                )
            v = 1.0 - dot / sqrt(sp * sq)
            o[i] = v if v > 0.0 else 0.0
        return out

    raise ValueError(f"unknown metric code {metric_code}")


def hamming_dists(cnp.uint64_t[:, ::1] packed_points,
                  cnp.uint64_t[::1] packed_query):
    cdef Py_ssize_t n = packed_points.shape[0]
    cdef Py_ssize_t w = packed_points.shape[1]
    cdef Py_ssize_t i, j
    cdef long long c
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] o = out

    if packed_query.shape[0] != w:
        raise ValueError("dimension mismatch between query and points")

    with nogil:
        for i in range(n):
            c = 0
            for j in range(w):
                c += ANNB_POPCOUNT64(packed_points[i, j] ^ packed_query[j])
            o[i] = <double> c
    return out


cdef inline bint _worse(double d1, long long i1, double d2, long long i2) nogil:
    # (d1, i1) ranks after (d2, i2) in the (distance, id) order
    if d1 != d2:
        return d1 > d2
    return i1 > i2


def top_k(cnp.float64_t[::1] dists, Py_ssize_t k):
    """k smallest entries under (distance, id), sorted ascending."""
    cdef Py_ssize_t n = dists.shape[0]
    if k > n:
        k = n
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ids = np.empty(k, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals = np.empty(k, dtype=np.float64)
    cdef cnp.int64_t[::1] hi = ids
    cdef cnp.float64_t[::1] hd = vals
    cdef Py_ssize_t i, pos, end
    cdef double d, td
    cdef long long ti

    if k == 0:
        return ids, vals

    with nogil:
        # max-heap of the k best seen so far, root = current worst
        for i in range(k):
            hd[i] = dists[i]
            hi[i] = i
        for pos in range(k // 2 - 1, -1, -1):
            _sift_down(hd, hi, pos, k)
        for i in range(k, n):
            d = dists[i]
            if _worse(hd[0], hi[0], d, i):
                hd[0] = d
                hi[0] = i
                _sift_down(hd, hi, 0, k)
        # pop back-to-front for ascending output
        end = k
        while end > 1:
            end -= 1
            td = hd[0]; ti = hi[0]
            hd[0] = hd[end]; hi[0] = hi[end]
            hd[end] = td; hi[end] = ti
            _sift_down(hd, hi, 0, end)
    return ids, vals


cdef void _sift_down(cnp.float64_t[::1] hd, cnp.int64_t[::1] hi,
                     Py_ssize_t pos, Py_ssize_t size) nogil:
    cdef Py_ssize_t child
    cdef double td
    cdef long long ti
    while True:
        child = 2 * pos + 1
        if child >= size:
            return
        if child + 1 < size and _worse(hd[child + 1], hi[child + 1],
                                       hd[child], hi[child]):
            child += 1
        if _worse(hd[child], hi[child], hd[pos], hi[pos]):
            td = hd[pos]; hd[pos] = hd[child]; hd[child] = td
            ti = hi[pos]; hi[pos] = hi[child]; hi[child] = ti
            pos = child
        else:
            return
