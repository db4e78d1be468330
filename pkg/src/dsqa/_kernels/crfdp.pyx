# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled dynamic-programming kernels for linear-chain sequence models.

Contract mirrors the pure fallback (``pydp``): log-space float64 scores,
``emis`` (n, T), ``trans`` (T, T) indexed [from, to], ``start``/``end``
length-T boundary vectors.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

IMPLEMENTATION = "cython"


cdef inline double _lse_row(double[::1] buf, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double hi = buf[0]
    cdef double acc = 0.0
    for i in range(1, n):
        if buf[i] > hi:
            hi = buf[i]
    for i in range(n):
        acc += exp(buf[i] - hi)
    return hi + log(acc)


def log_partition(double[:, ::1] emis, double[:, ::1] trans,
                  double[::1] start, double[::1] end):
    """log sum over all tag paths of exp(path score), by the forward recursion."""
    cdef Py_ssize_t n = emis.shape[0]
    cdef Py_ssize_t T = emis.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alpha = np.empty(T)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nxt = np.empty(T)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.empty(T)
    cdef double[::1] a = alpha, b = nxt, w = buf
    cdef Py_ssize_t i, t, u
    for t in range(T):
        a[t] = start[t] + emis[0, t]
    for i in range(1, n):
        for t in range(T):
            for u in range(T):
                w[u] = a[u] + trans[u, t]
            b[t] = emis[i, t] + _lse_row(w, T)
        a, b = b, a
    for t in range(T):
        w[t] = a[t] + end[t]
    return _lse_row(w, T)


def forward_backward(double[:, ::1] emis, double[:, ::1] trans,
                     double[::1] start, double[::1] end):
    """Returns (logZ, unary marginals (n,T), pairwise marginals (n-1,T,T))."""
    cdef Py_ssize_t n = emis.shape[0]
    cdef Py_ssize_t T = emis.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] alpha_arr = np.empty((n, T))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] beta_arr = np.empty((n, T))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.empty(T)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[::1] w = buf
    cdef Py_ssize_t i, t, u
    cdef double log_z

    for t in range(T):
        alpha[0, t] = start[t] + emis[0, t]
    for i in range(1, n):
        for t in range(T):
            for u in range(T):
                w[u] = alpha[i - 1, u] + trans[u, t]
            alpha[i, t] = emis[i, t] + _lse_row(w, T)
    for t in range(T):
        w[t] = alpha[n - 1, t] + end[t]
    log_z = _lse_row(w, T)

    for t in range(T):
        beta[n - 1, t] = end[t]
    for i in range(n - 2, -1, -1):
        for t in range(T):
            for u in range(T):
                w[u] = trans[t, u] + emis[i + 1, u] + beta[i + 1, u]
            beta[i, t] = _lse_row(w, T)

    cdef cnp.ndarray[cnp.float64_t, ndim=2] unary_arr = np.empty((n, T))
    cdef cnp.ndarray[cnp.float64_t, ndim=3] pair_arr = np.empty((max(n - 1, 0), T, T))
    cdef double[:, ::1] unary = unary_arr
    cdef double[:, :, ::1] pair = pair_arr
    for i in range(n):
        for t in range(T):
            unary[i, t] = exp(alpha[i, t] + beta[i, t] - log_z)
    for i in range(n - 1):
        for t in range(T):
            for u in range(T):
                pair[i, t, u] = exp(
                    alpha[i, t] + trans[t, u] + emis[i + 1, u] + beta[i + 1, u] - log_z
                )
    return log_z, unary_arr, pair_arr


def viterbi_path(double[:, ::1] emis, double[:, ::1] trans,
                 double[::1] start, double[::1] end):
    """Max-scoring tag path; ties resolve to the lowest tag index per step.

    Returns (path as int64 array, path score).
    """
    cdef Py_ssize_t n = emis.shape[0]
    cdef Py_ssize_t T = emis.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] delta_arr = np.empty((n, T))
    cdef cnp.ndarray[cnp.int64_t, ndim=2] bp_arr = np.zeros((n, T), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] path_arr = np.empty(n, dtype=np.int64)
    cdef double[:, ::1] delta = delta_arr
    cdef cnp.int64_t[:, ::1] bp = bp_arr
    cdef cnp.int64_t[::1] path = path_arr
    cdef Py_ssize_t i, t, u, best_u
    cdef double best, cand, final_best

    for t in range(T):
        delta[0, t] = start[t] + emis[0, t]
    for i in range(1, n):
        for t in range(T):
            best = delta[i - 1, 0] + trans[0, t]
            best_u = 0
            for u in range(1, T):
                cand = delta[i - 1, u] + trans[u, t]
                if cand > best:
                    best = cand
                    best_u = u
            delta[i, t] = emis[i, t] + best
            bp[i, t] = best_u

    best_u = 0
    final_best = delta[n - 1, 0] + end[0]
    for t in range(1, T):
        cand = delta[n - 1, t] + end[t]
        if cand > final_best:
            final_best = cand
            best_u = t
    path[n - 1] = best_u
    for i in range(n - 1, 0, -1):
        path[i - 1] = bp[i, path[i]]
    return path_arr, final_best
