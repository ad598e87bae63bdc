"""Independent reference computations used as test oracles.

Apart from the long-run FISTA reference, none of these call into the
package's prox, conjugate or solver code.
"""
import warnings

import cvxpy as cp
import numpy as np
from scipy import optimize

from vrsolve.solvers import SolverParams, solve


def grid_argmin(f, center, radius, rounds=12, points=201):
    """Minimize a 1-D convex function by repeated zooming grid search.

    ``f`` must accept an array of candidate points.
    """
    lo, hi = center - radius, center + radius
    best = center
    for _ in range(rounds):
        xs = np.linspace(lo, hi, points)
        vals = np.broadcast_to(f(xs), xs.shape)
        i = int(np.argmin(vals))
        best = xs[i]
        step = xs[1] - xs[0]
        lo, hi = best - 2 * step, best + 2 * step
    return best


def _scalar_penalty(kind, lam, lam2):
    if kind == "none":
        return lambda w: 0.0
    if kind == "l2":
        return lambda w: 0.5 * lam * w * w
    if kind == "l1":
        return lambda w: lam * np.abs(w)
    if kind == "elastic-net":
        return lambda w: lam * np.abs(w) + 0.5 * lam2 * w * w
    raise ValueError(kind)


SEPARABLE = ("none", "l2", "l1", "elastic-net")


def prox_oracle(kind, v, eta, lam=0.0, lam2=0.0, lam3=0.0):
    """``argmin_w 0.5||w - v||^2 + eta psi(w)`` by brute force.

    Coordinate-separable penalties use a zooming grid search per entry;
    the coupled ones (fused lasso, balls, mixed norms) are solved as conic
    programs to ~1e-10.
    """
    v = np.asarray(v, dtype=np.float64)
    if kind in SEPARABLE:
        pen = _scalar_penalty(kind, lam, lam2)
        out = np.empty_like(v)
        for idx, vi in np.ndenumerate(v):
            out[idx] = grid_argmin(lambda w: 0.5 * (w - vi) ** 2
                                   + eta * pen(w), vi, abs(vi) + 1.0)
        return out
    shape = v.shape
    V = v if v.ndim == 2 else v[:, None]
    p, k = V.shape
    W = cp.Variable((p, k))
    if kind == "fused-lasso":
        terms = [lam * cp.norm1(cp.diff(W[:, c])) + lam2 * cp.norm1(W[:, c])
                 + 0.5 * lam3 * cp.sum_squares(W[:, c]) for c in range(k)]
        obj = 0.5 * cp.sum_squares(W - V) + eta * sum(terms)
        cons = []
    elif kind == "l1-ball":
        obj = 0.5 * cp.sum_squares(W - V)
        cons = [cp.norm1(W[:, c]) <= lam for c in range(k)]
    elif kind == "l2-ball":
        obj = 0.5 * cp.sum_squares(W - V)
        cons = [cp.norm2(W[:, c]) <= lam for c in range(k)]
    elif kind == "l1l2":
        obj = 0.5 * cp.sum_squares(W - V) + eta * lam * cp.sum(
            cp.norm(W, 2, axis=1))
        cons = []
    elif kind == "l1linf":
        obj = 0.5 * cp.sum_squares(W - V) + eta * lam * cp.sum(
            cp.max(cp.abs(W), axis=1))
        cons = []
    else:
        raise ValueError(kind)
    prob = cp.Problem(cp.Minimize(obj), cons)
    # an "inaccurate" status at these tolerances is still far below the
    # 1e-6 comparisons the tests make
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", "Solution may be inaccurate")
        prob.solve(solver="CLARABEL", tol_gap_abs=1e-11, tol_gap_rel=1e-11,
                   tol_feas=1e-11)
    return np.asarray(W.value).reshape(shape)


def central_difference(f, x, h=1e-6):
    """Gradient of a scalar function of an array by central differences."""
    x = np.array(x, dtype=np.float64)
    g = np.empty_like(x)
    for idx in np.ndindex(x.shape):
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def conjugate_oracle(loss, u, bound=60.0):
    """``sup_s u s - loss(s)`` for a scalar convex loss, numerically.

    Returns ``inf`` when the supremum grows without bound on ``[-B, B]``.
    """
    res = optimize.minimize_scalar(lambda s: loss(s) - u * s,
                                   bounds=(-bound, bound), method="bounded",
                                   options={"xatol": 1e-12})
    s = res.x
    if abs(s) > bound * 0.999:
        return np.inf
    return u * s - loss(s)


def lasso_cd(X, y, lam, lam2=0.0, iters=5000, tol=1e-14):
    """Coordinate descent for ``(1/2n)||y - Xw||^2 + lam|w|_1 + lam2/2 |w|^2``."""
    n, p = X.shape
    w = np.zeros(p)
    r = y.copy()
    col = (X ** 2).sum(axis=0) / n
    for _ in range(iters):
        delta = 0.0
        for j in range(p):
            old = w[j]
            rho = X[:, j] @ r / n + col[j] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / (col[j] + lam2)
            if new != old:
                r -= X[:, j] * (new - old)
                w[j] = new
                delta = max(delta, abs(new - old))
        if delta < tol:
            break
    return w


def fista_reference(problem, tol=1e-10, max_epochs=20000):
    """High-accuracy reference optimum from a long FISTA run."""
    res = solve(problem, "fista", SolverParams(tol=tol, max_epochs=max_epochs,
                                               it0=50))
    return res
