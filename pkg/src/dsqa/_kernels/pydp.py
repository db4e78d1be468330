"""Pure-numpy dynamic-programming kernels for linear-chain sequence models.

Same contract as the compiled twin (``crfdp``): all scores are log-space
float64; ``emis`` is (n, T), ``trans`` is (T, T) indexed [from, to], and
``start``/``end`` are length-T boundary scores.
"""

from __future__ import annotations

import numpy as np

IMPLEMENTATION = "python"


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    hi = np.max(a, axis=axis, keepdims=True)
    return (hi + np.log(np.sum(np.exp(a - hi), axis=axis, keepdims=True))).squeeze(axis)


def log_partition(emis, trans, start, end) -> float:
    """log sum over all tag paths of exp(path score), by the forward recursion."""
    n = emis.shape[0]
    alpha = start + emis[0]
    for i in range(1, n):
        alpha = emis[i] + _logsumexp(alpha[:, None] + trans, axis=0)
    return float(_logsumexp(alpha + end, axis=0))


def forward_backward(emis, trans, start, end):
    """Returns (logZ, unary marginals (n,T), pairwise marginals (n-1,T,T))."""
    n, T = emis.shape
    alpha = np.empty((n, T), dtype=np.float64)
    alpha[0] = start + emis[0]
    for i in range(1, n):
        alpha[i] = emis[i] + _logsumexp(alpha[i - 1][:, None] + trans, axis=0)
    log_z = float(_logsumexp(alpha[n - 1] + end, axis=0))

    beta = np.empty((n, T), dtype=np.float64)
    beta[n - 1] = end
    for i in range(n - 2, -1, -1):
        beta[i] = _logsumexp(trans + (emis[i + 1] + beta[i + 1])[None, :], axis=1)

    unary = np.exp(alpha + beta - log_z)
    pairwise = np.empty((max(n - 1, 0), T, T), dtype=np.float64)
    for i in range(n - 1):
        pairwise[i] = np.exp(
            alpha[i][:, None] + trans + (emis[i + 1] + beta[i + 1])[None, :] - log_z
        )
    return log_z, unary, pairwise


def viterbi_path(emis, trans, start, end):
    """Max-scoring tag path; ties resolve to the lowest tag index per step.

    Returns (path as int64 array, path score).
    """
    n, T = emis.shape
    delta = np.empty((n, T), dtype=np.float64)
    backptr = np.zeros((n, T), dtype=np.int64)
    delta[0] = start + emis[0]
    for i in range(1, n):
        scores = delta[i - 1][:, None] + trans
        backptr[i] = np.argmax(scores, axis=0)
        delta[i] = emis[i] + np.max(scores, axis=0)
    final = delta[n - 1] + end
    last = int(np.argmax(final))
    path = np.empty(n, dtype=np.int64)
    path[n - 1] = last
    for i in range(n - 1, 0, -1):
        path[i - 1] = backptr[i, path[i]]
    return path, float(final[last])
