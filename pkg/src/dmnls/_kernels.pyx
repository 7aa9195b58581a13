# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the variation machinery.

``pvar_chain`` is bit-identical to the fallback in ``_kernels_py`` (same
order of additions, libm ``pow``). ``pairwise_l2`` sums sequentially while
numpy sums pairwise, so distances agree to rounding only.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt

cnp.import_array()


def pvar_chain(const double[:, ::1] dist, double p):
    """best[j] = max over chains ending at j of sum dist(a_{k-1}, a_k)**p."""
    cdef Py_ssize_t K = dist.shape[0]
    cdef Py_ssize_t i, j
    cdef double cand, cur
    out = np.zeros(K, dtype=np.float64)
    cdef double[::1] best = out
    for j in range(1, K):
        cur = 0.0
        for i in range(j):
            cand = best[i] + pow(dist[i, j], p)
            if cand > cur:
                cur = cand
        best[j] = cur
    return out


def pairwise_l2(const double complex[:, ::1] X, double weight):
    """Symmetric matrix of sqrt(weight * sum |X[i] - X[j]|**2)."""
    cdef Py_ssize_t K = X.shape[0]
    cdef Py_ssize_t n = X.shape[1]
    cdef Py_ssize_t i, j, m
    cdef double acc, re, im
    cdef double complex z
    out = np.zeros((K, K), dtype=np.float64)
    cdef double[:, ::1] D = out
    for i in range(K):
        for j in range(i + 1, K):
            acc = 0.0
            for m in range(n):
                z = X[i, m] - X[j, m]
                re = z.real
                im = z.imag
                acc += re * re + im * im
            D[i, j] = sqrt(weight * acc)
            D[j, i] = D[i, j]
    return out
