"""Compiled inner loops for the incremental solvers.

Rows are accessed through ``(is_sparse, dense, data, indices, indptr)`` so
one kernel serves both layouts. Weights are (p, k) float64 matrices.
"""
import numpy as np
from numba import njit

from ..losses import row_derivative
from ..penalties import L2, prox_matrix, prox_row


@njit(cache=True, nogil=True)
def row_scores(is_sparse, dense, data, indices, indptr, i, W, b, fit_int, out):
    k = W.shape[1]
    for c in range(k):
        out[c] = b[c] if fit_int else 0.0
    if is_sparse:
        for q in range(indptr[i], indptr[i + 1]):
            j = indices[q]
            v = data[q]
            for c in range(k):
                out[c] += v * W[j, c]
    else:
        p = dense.shape[1]
        for j in range(p):
            v = dense[i, j]
            for c in range(k):
                out[c] += v * W[j, c]


@njit(cache=True, nogil=True)
def full_gradient(is_sparse, dense, data, indices, indptr, Y, code, W, b,
                  fit_int, G, Gb):
    """``G = (1/n) X^T D``, ``Gb = mean(D)`` with D the loss derivatives."""
    n = Y.shape[0]
    p, k = W.shape
    s = np.empty(k)
    d = np.empty(k)
    G[:, :] = 0.0
    Gb[:] = 0.0
    for i in range(n):
        row_scores(is_sparse, dense, data, indices, indptr, i, W, b, fit_int, s)
        row_derivative(code, Y[i], s, d)
        if is_sparse:
            for q in range(indptr[i], indptr[i + 1]):
                j = indices[q]
                v = data[q]
                for c in range(k):
                    G[j, c] += v * d[c]
        else:
            for j in range(p):
                v = dense[i, j]
                for c in range(k):
                    G[j, c] += v * d[c]
        for c in range(k):
            Gb[c] += d[c]
    G /= n
    Gb /= n


@njit(cache=True, nogil=True)
def _catch_up(W, j, m, a, eta, kappa, C, G):
    # apply m skipped steps w <- a*w + a*eta*(kappa*C - G) to row j
    k = W.shape[1]
    if m == 0:
        return
    if a == 1.0:
        for c in range(k):
            W[j, c] += m * eta * (kappa * C[j, c] - G[j, c])
    else:
        am = a ** m
        geo = (1.0 - am) / (1.0 - a)
        for c in range(k):
            e = a * eta * (kappa * C[j, c] - G[j, c])
            W[j, c] = am * W[j, c] + e * geo


@njit(cache=True, nogil=True)
def svrg_epoch(is_sparse, dense, data, indices, indptr, Y, code,
               W, b, Wa, ba, G, Gb, fit_int, eta,
               pcode, lam, lam2, lam3, kappa, C, Cb,
               idx, refresh, lazy, counters):
    """Inner steps of prox-SVRG for the sampled indices ``idx``.

    ``refresh[t]`` triggers a new anchor after step t.
    ``counters`` accumulates [gradient evaluations, touched weight rows,
    anchor refreshes].
    """
    n = Y.shape[0]
    p, k = W.shape
    T = idx.shape[0]
    sy = np.empty(k)
    sa = np.empty(k)
    dy = np.empty(k)
    da = np.empty(k)
    delta = np.empty(k)
    V = np.empty((p, k))
    ybv = np.empty(k)
    lam_q = lam if pcode == L2 else 0.0
    a = 1.0 / (1.0 + eta * (lam_q + kappa))
    stamp = np.zeros(p, dtype=np.int64)
    for t in range(T):
        i = idx[t]
        if lazy:
            # bring the rows of x_i up to date, then update them
            for q in range(indptr[i], indptr[i + 1]):
                j = indices[q]
                _catch_up(W, j, t - stamp[j], a, eta, kappa, C, G)
                stamp[j] = t
            counters[1] += indptr[i + 1] - indptr[i]
            row_scores(True, dense, data, indices, indptr, i, W, b, fit_int, sy)
            row_derivative(code, Y[i], sy, dy)
            row_scores(True, dense, data, indices, indptr, i, Wa, ba, fit_int,
                       sa)
            row_derivative(code, Y[i], sa, da)
            for c in range(k):
                delta[c] = dy[c] - da[c]
            for q in range(indptr[i], indptr[i + 1]):
                j = indices[q]
                v = data[q]
                for c in range(k):
                    W[j, c] = a * (W[j, c] - eta * (G[j, c] + delta[c] * v)
                                   + eta * kappa * C[j, c])
                stamp[j] = t + 1
            counters[1] += indptr[i + 1] - indptr[i]
            for c in range(k):
                ybv[c] = b[c]
        else:
            for c in range(k):
                ybv[c] = b[c]
            row_scores(is_sparse, dense, data, indices, indptr, i, W, ybv,
                       fit_int, sy)
            row_derivative(code, Y[i], sy, dy)
            row_scores(is_sparse, dense, data, indices, indptr, i, Wa, ba,
                       fit_int, sa)
            row_derivative(code, Y[i], sa, da)
            for c in range(k):
                delta[c] = dy[c] - da[c]
            for j in range(p):
                for c in range(k):
                    V[j, c] = W[j, c] - eta * G[j, c]
            if is_sparse:
                for q in range(indptr[i], indptr[i + 1]):
                    j = indices[q]
                    v = data[q]
                    for c in range(k):
                        V[j, c] -= eta * delta[c] * v
            else:
                for j in range(p):
                    v = dense[i, j]
                    for c in range(k):
                        V[j, c] -= eta * delta[c] * v
            if kappa > 0.0:
                ak = 1.0 / (1.0 + eta * kappa)
                for j in range(p):
                    for c in range(k):
                        V[j, c] = (V[j, c] + eta * kappa * C[j, c]) * ak
                prox_matrix(pcode, V, eta * ak, lam, lam2, lam3, W)
            else:
                prox_matrix(pcode, V, eta, lam, lam2, lam3, W)
            counters[1] += p
        if fit_int:
            for c in range(k):
                b[c] = (ybv[c] - eta * (delta[c] + Gb[c]) + eta * kappa * Cb[c]) \
                    / (1.0 + eta * kappa)
        counters[0] += 2
        if refresh[t]:
            if lazy:
                for j in range(p):
                    _catch_up(W, j, t + 1 - stamp[j], a, eta, kappa, C, G)
                    stamp[j] = t + 1
            Wa[:, :] = W
            for c in range(k):
                ba[c] = b[c]
            full_gradient(is_sparse, dense, data, indices, indptr, Y, code,
                          Wa, ba, fit_int, G, Gb)
            counters[0] += n
            counters[2] += 1
    if lazy:
        for j in range(p):
            _catch_up(W, j, T - stamp[j], a, eta, kappa, C, G)


@njit(cache=True, nogil=True)
def miso_refresh_weights(A, Ab, n, mu, kappa, C, Cb, fit_int,
                         rcode, rlam, rlam2, rlam3, W, b):
    """Recompute ``W = prox_{res/mu}((kappa C - A/n) / mu)`` and ``b``."""
    p, k = W.shape
    Z = np.empty((p, k))
    for j in range(p):
        for c in range(k):
            Z[j, c] = (kappa * C[j, c] - A[j, c] / n) / mu
    prox_matrix(rcode, Z, 1.0 / mu, rlam, rlam2, rlam3, W)
    if fit_int:
        for c in range(k):
            b[c] = Cb[c] - Ab[c] / (n * kappa)


@njit(cache=True, nogil=True)
def miso_epoch(is_sparse, dense, data, indices, indptr, Y, code,
               W, b, A, Ab, alpha, fit_int, mu, kappa, C, Cb, delta,
               rcode, rlam, rlam2, rlam3, row_sep, idx, counters):
    """MISO steps for the sampled indices ``idx``.

    ``alpha[i]`` holds the damped loss derivative of example i and
    ``A = sum_i x_i alpha_i^T``; the iterate is the prox of the averaged
    lower bound's minimizer. ``counters`` accumulates [gradient
    evaluations, touched weight rows].
    """
    n = Y.shape[0]
    p, k = W.shape
    s = np.empty(k)
    d = np.empty(k)
    dif = np.empty(k)
    z = np.empty(k)
    for t in range(idx.shape[0]):
        i = idx[t]
        row_scores(is_sparse, dense, data, indices, indptr, i, W, b, fit_int, s)
        row_derivative(code, Y[i], s, d)
        counters[0] += 1
        for c in range(k):
            dif[c] = delta * (d[c] - alpha[i, c])
            alpha[i, c] += dif[c]
            Ab[c] += dif[c]
        if is_sparse:
            for q in range(indptr[i], indptr[i + 1]):
                j = indices[q]
                v = data[q]
                for c in range(k):
                    A[j, c] += v * dif[c]
            counters[1] += indptr[i + 1] - indptr[i]
        else:
            for j in range(p):
                v = dense[i, j]
                for c in range(k):
                    A[j, c] += v * dif[c]
            counters[1] += p
        if row_sep:
            if is_sparse:
                for q in range(indptr[i], indptr[i + 1]):
                    j = indices[q]
                    for c in range(k):
                        z[c] = (kappa * C[j, c] - A[j, c] / n) / mu
                    prox_row(rcode, z, 1.0 / mu, rlam, rlam2, W[j])
                counters[1] += indptr[i + 1] - indptr[i]
            else:
                for j in range(p):
                    for c in range(k):
                        z[c] = (kappa * C[j, c] - A[j, c] / n) / mu
                    prox_row(rcode, z, 1.0 / mu, rlam, rlam2, W[j])
                counters[1] += p
            if fit_int:
                for c in range(k):
                    b[c] = Cb[c] - Ab[c] / (n * kappa)
        else:
            miso_refresh_weights(A, Ab, n, mu, kappa, C, Cb, fit_int,
                                 rcode, rlam, rlam2, rlam3, W, b)
            counters[1] += p


@njit(cache=True, nogil=True)
def miso_accumulate(is_sparse, dense, data, indices, indptr, alpha, p):
    """``A = sum_i x_i alpha_i^T`` from scratch (drift check / init)."""
    n, k = alpha.shape
    A = np.zeros((p, k))
    for i in range(n):
        if is_sparse:
            for q in range(indptr[i], indptr[i + 1]):
                j = indices[q]
                for c in range(k):
                    A[j, c] += data[q] * alpha[i, c]
        else:
            for j in range(p):
                for c in range(k):
                    A[j, c] += dense[i, j] * alpha[i, c]
    return A


@njit(cache=True, nogil=True)
def all_derivatives(is_sparse, dense, data, indices, indptr, Y, code, W, b,
                    fit_int):
    n = Y.shape[0]
    k = W.shape[1]
    D = np.empty((n, k))
    s = np.empty(k)
    for i in range(n):
        row_scores(is_sparse, dense, data, indices, indptr, i, W, b, fit_int, s)
        row_derivative(code, Y[i], s, D[i])
    return D

