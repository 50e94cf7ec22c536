# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled support scan: skips any entry whose distance cannot raise the max."""

import numpy as np


def max_support_distance(a, const double[:, ::1] dist, double tau):
    cdef Py_ssize_t m = dist.shape[0]
    arr = np.ascontiguousarray(a, dtype=np.complex128).reshape(-1, m, m)
    cdef const double complex[:, :, ::1] v = arr
    cdef Py_ssize_t ns = v.shape[0]
    cdef Py_ssize_t s, i, j
    cdef double best = 0.0
    cdef double tau2 = tau * tau
    cdef double re, im
    cdef bint found = False
    for i in range(m):
        for j in range(m):
            if found and dist[i, j] <= best:
                continue
            for s in range(ns):
                re = v[s, i, j].real
                im = v[s, i, j].imag
                if re * re + im * im > tau2:
                    if not found or dist[i, j] > best:
                        best = dist[i, j]
                    found = True
                    break
    return best
