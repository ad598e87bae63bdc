"""Outer loops that accelerate an inner solver through proximal subproblems.

Both wrappers repeatedly (approximately) minimize
``F(w) + (kappa/2)||w - x||^2`` with a fixed per-subproblem budget,
warm-starting the inner solver, and stop on the duality gap of the
original problem.
"""
import math
import time

import numpy as np

from ..duality import GapTracker
from ..logs import (SILENT, STARS, elapsed_line, memory_line)
from .base import Checkpoints, FitResult, initial_point


def choose_kappa(family, L, mu, n):
    """Default proximal weight for an inner solver family.

    ``family`` is one of ``'miso'``, ``'svrg'`` or ``'ista'``.
    """
    if not L > 0:
        raise ValueError("Lipschitz constant must be positive")
    if family == "miso":
        return max((L - mu) / (n + 1) - mu, 0.0)
    if family == "svrg":
        return max(L / (2.0 * n) - mu, 0.0)
    if family == "ista":
        return L / 10.0
    raise ValueError("unknown solver family %r" % (family,))


def _next_alpha(alpha, q):
    # positive root of a^2 + (alpha^2 - q) a - alpha^2 = 0
    c = alpha * alpha - q
    return 0.5 * (-c + math.sqrt(c * c + 4.0 * alpha * alpha))


def catalyst(inner, problem, params, kappa, W0=None, b0=None, log=SILENT):
    """Nesterov-extrapolated inexact proximal point iterations.

    With ``kappa = 0`` the subproblem is the original problem, the
    momentum vanishes and the inner solver runs unchanged.
    """
    t0 = time.perf_counter()
    log(STARS)
    log("Catalyst Accelerator")
    inner.header(log)
    W, b = initial_point(problem, W0, b0)
    inner.start(W, b)
    tracker = GapTracker(problem, params.tol, log=log, t0=t0)
    tracker.start(inner.W, inner.b)
    mu = problem.mu
    q = mu / (mu + kappa) if mu + kappa > 0 else 0.0
    alpha = math.sqrt(q) if q > 0 else 1.0
    Yw, Yb = W.copy(), b.copy()
    Xw_prev, Xb_prev = W.copy(), b.copy()
    cp = Checkpoints(params)
    budget = params.inner_epochs
    while not cp.exhausted:
        step = min(budget, params.max_epochs - cp.epoch)
        inner.run(step, kappa, (Yw, Yb))
        cp.advance(step)
        Xw, Xb = inner.W.copy(), inner.b.copy()
        alpha_next = _next_alpha(alpha, q)
        beta = alpha * (1.0 - alpha) / (alpha * alpha + alpha_next)
        Yw = Xw + beta * (Xw - Xw_prev)
        Yb = Xb + beta * (Xb - Xb_prev)
        Xw_prev, Xb_prev = Xw, Xb
        alpha = alpha_next
        if cp.due:
            tracker.evaluate(Xw, Xb, cp.epoch)
            cp.mark()
            if tracker.converged:
                break
    elapsed = time.perf_counter() - t0
    log(elapsed_line(elapsed))
    return FitResult(tracker.best_W, tracker.best_b, tracker.trace, cp.epoch,
                     tracker.converged, "catalyst-" + inner.name,
                     grad_evals=inner.grad_evals, elapsed=elapsed,
                     extra={"kappa": kappa})


class LBFGSMemory:
    """Limited (s, y) history with the two-loop inverse-Hessian product."""

    def __init__(self, size, kappa):
        self.size = size
        self.kappa = kappa
        self.S = []
        self.Yv = []
        self.skipped = 0

    def __len__(self):
        return len(self.S)

    def push(self, s, y):
        if self.size == 0:
            return False
        sy = float(s @ y)
        if not sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            self.skipped += 1
            return False
        self.S.append(s)
        self.Yv.append(y)
        if len(self.S) > self.size:
            self.S.pop(0)
            self.Yv.pop(0)
        return True

    def reset(self):
        self.S.clear()
        self.Yv.clear()

    def apply(self, g):
        """Approximate ``H g`` with H the inverse envelope Hessian."""
        if not self.S:
            return g / self.kappa
        q = g.copy()
        rhos = [1.0 / float(s @ y) for s, y in zip(self.S, self.Yv)]
        alphas = []
        for s, y, rho in zip(reversed(self.S), reversed(self.Yv),
                             reversed(rhos)):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        s, y = self.S[-1], self.Yv[-1]
        r = q * (float(s @ y) / float(y @ y))
        for s, y, rho, a in zip(self.S, self.Yv, rhos, reversed(alphas)):
            bcoef = rho * float(y @ r)
            r += (a - bcoef) * s
        if not np.all(np.isfinite(r)):
            self.reset()
            return g / self.kappa
        return r


def qning(inner, problem, params, kappa, W0=None, b0=None, log=SILENT):
    """L-BFGS on the Moreau envelope ``F_kappa(x) = min_w F(w) + kappa/2 ||w - x||^2``.

    Each envelope evaluation is one warm-started inner solve returning
    ``w(x)``; the envelope gradient is ``kappa (x - w(x))`` and its value
    is estimated by the subproblem objective at ``w(x)``. A quasi-Newton
    step is kept if it decreases the envelope by ``||g||^2 / (4 kappa)``,
    otherwise the plain proximal point ``x = w(x)`` is taken and counted
    as an additional line-search step.
    """
    if not kappa > 0:
        raise ValueError("qning needs kappa > 0")
    t0 = time.perf_counter()
    log(memory_line(params.memory))
    log(STARS)
    log("QNing Accelerator")
    inner.header(log)
    W, b = initial_point(problem, W0, b0)
    inner.start(W, b)
    tracker = GapTracker(problem, params.tol, log=log, t0=t0)
    tracker.start(inner.W, inner.b)
    cp = Checkpoints(params)
    budget = params.inner_epochs
    p, k = W.shape
    fit_b = problem.fit_intercept

    def pack(Wm, bv):
        return np.concatenate([Wm.ravel(), bv]) if fit_b else Wm.ravel().copy()

    def unpack(v):
        Wm = v[:p * k].reshape(p, k).copy()
        bv = v[p * k:].copy() if fit_b else np.zeros(k)
        return Wm, bv

    def envelope(x):
        Cw, Cb = unpack(x)
        inner.warm_start(Cw, Cb)
        step = min(budget, max(params.max_epochs - cp.epoch, 1))
        inner.run(step, kappa, (Cw, Cb))
        cp.advance(step)
        z = pack(inner.W, inner.b)
        F = problem.primal(inner.W, inner.b) + 0.5 * kappa * float(
            (z - x) @ (z - x))
        return z, F, kappa * (x - z)

    memory = LBFGSMemory(params.memory, kappa)
    line_search = 0
    x = pack(W, b)
    z, F, g = envelope(x)
    while True:
        if cp.due:
            zw, zb = unpack(z)
            tracker.evaluate(zw, zb, cp.epoch)
            cp.mark()
            if tracker.converged or cp.exhausted:
                break
        x_try = x - memory.apply(g)
        z_try, F_try, g_try = envelope(x_try)
        if F_try <= F - float(g @ g) / (4.0 * kappa):
            x_new, z_new, F_new, g_new = x_try, z_try, F_try, g_try
        else:
            line_search += 1
            if cp.exhausted:
                x_new, z_new, F_new, g_new = x_try, z_try, F_try, g_try
            else:
                x_new = z
                z_new, F_new, g_new = envelope(x_new)
        memory.push(x_new - x, g_new - g)
        x, z, F, g = x_new, z_new, F_new, g_new
    elapsed = time.perf_counter() - t0
    log(elapsed_line(elapsed))
    log("Total additional line search steps: %d" % line_search)
    log("Total skipping l-bfgs steps: %d" % memory.skipped)
    return FitResult(tracker.best_W, tracker.best_b, tracker.trace, cp.epoch,
                     tracker.converged, "qning-" + inner.name,
                     grad_evals=inner.grad_evals,
                     line_search_steps=line_search,
                     skipped_steps=memory.skipped, elapsed=elapsed,
                     extra={"kappa": kappa, "envelope_grad": g})
