# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pool-adjacent-violators kernel (uniform weights, row-wise)."""

import numpy as np


cdef void _pava_row(const double* y, double* out, Py_ssize_t m,
                    double* sums, Py_ssize_t* counts) noexcept nogil:
    cdef Py_ssize_t nb = 0, i, j, k = 0
    for i in range(m):
        sums[nb] = y[i]
        counts[nb] = 1
        nb += 1
        # merge while the previous block mean exceeds the last one
        while nb > 1 and sums[nb - 2] * counts[nb - 1] > sums[nb - 1] * counts[nb - 2]:
            sums[nb - 2] += sums[nb - 1]
            counts[nb - 2] += counts[nb - 1]
            nb -= 1
    for i in range(nb):
        for j in range(counts[i]):
            out[k] = sums[i] / counts[i]
            k += 1


def pava_rows(y):
    """Project every row of a 2-d float array onto the nondecreasing cone."""
    cdef const double[:, ::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t q = yv.shape[0], m = yv.shape[1], r
    out = np.empty((q, m), dtype=np.float64)
    if q == 0 or m == 0:
        return out
    cdef double[:, ::1] ov = out
    cdef double[::1] sums = np.empty(m, dtype=np.float64)
    cdef Py_ssize_t[::1] counts = np.empty(m, dtype=np.intp)
    with nogil:
        for r in range(q):
            _pava_row(&yv[r, 0], &ov[r, 0], m, &sums[0], &counts[0])
    return out
