"""Regularizers and constraints: values, proximal operators, conjugates.

Weights are handled as (p, k) matrices. Elementwise and vector penalties
(``l2``, ``l1``, ``elastic-net``, ``fused-lasso``, the balls, ``none``)
act on each column ``W[:, j]``; ``l1l2`` and ``l1linf`` act on each row
``W[j, :]``. Univariate problems are the k = 1 case.
"""
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "PenaltyConfig",
    "PENALTIES",
    "penalty_value",
    "prox",
    "prox_aug",
    "strong_convexity",
    "split_quadratic",
    "conjugate_certificate",
    "project_l1_ball",
    "tv1d_prox",
]

NONE, L2, L1, ELASTIC, FUSED, L1BALL, L2BALL, L1L2, L1LINF = range(9)

PENALTIES = {
    "none": NONE,
    "l2": L2,
    "l1": L1,
    "elastic-net": ELASTIC,
    "fused-lasso": FUSED,
    "l1-ball": L1BALL,
    "l2-ball": L2BALL,
    "l1l2": L1L2,
    "l1linf": L1LINF,
}

BANNERS = {
    NONE: "No regularization",
    L2: "L2 regularization",
    L1: "L1 regularization",
    ELASTIC: "Elastic-net regularization",
    FUSED: "Fused Lasso regularization",
    L1BALL: "L1-ball constraint",
    L2BALL: "L2-ball constraint",
    L1L2: "Mixed L1-L2 norm regularization",
    L1LINF: "Mixed L1-Linf norm regularization",
}

# penalties whose prox decomposes over rows of W
ROW_SEPARABLE = frozenset({NONE, L2, L1, ELASTIC, L1L2, L1LINF})

_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty kind plus its weights ``lambd``, ``lambd2``, ``lambd3``.

    For the ball constraints ``lambd`` is the radius.
    """

    kind: str = "l2"
    lambd: float = 0.0
    lambd2: float = 0.0
    lambd3: float = 0.0

    def __post_init__(self):
        if self.kind not in PENALTIES:
            raise ValueError("unknown penalty %r; valid names: %s"
                             % (self.kind, ", ".join(PENALTIES)))
        for name in ("lambd", "lambd2", "lambd3"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError("%s must be a finite nonnegative number, "
                                 "got %r" % (name, v))
        if self.code in (L1BALL, L2BALL) and self.lambd <= 0:
            raise ValueError("ball constraints need a positive radius")

    @property
    def code(self):
        return PENALTIES[self.kind]

    @property
    def banner(self):
        return BANNERS[self.code]

    @property
    def is_constraint(self):
        return self.code in (L1BALL, L2BALL)

    @property
    def is_trivial(self):
        """True when the penalty is identically zero."""
        return self.code == NONE or (
            not self.is_constraint
            and self.lambd == 0 and self.lambd2 == 0 and self.lambd3 == 0)

    def params(self):
        return self.code, float(self.lambd), float(self.lambd2), float(
            self.lambd3)


# ------------------------------------------------------------ compiled prox

@njit(cache=True, nogil=True)
def _soft(x, t):
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True, nogil=True)
def tv1d_prox(y, lam, out):
    """Exact prox of ``lam * sum |x[j+1] - x[j]|`` (Condat's direct method)."""
    width = y.shape[0]
    if width == 0:
        return
    if lam <= 0.0:
        for j in range(width):
            out[j] = y[j]
        return
    k = 0
    k0 = 0
    umin = lam
    umax = -lam
    vmin = y[0] - lam
    vmax = y[0] + lam
    kplus = 0
    kminus = 0
    twolam = 2.0 * lam
    minlam = -lam
    while True:
        while k == width - 1:
            if umin < 0.0:
                while True:
                    out[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = k0
                kminus = k
                vmin = y[k]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    out[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = k0
                kplus = k
                vmax = y[k]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while True:
                    out[k0] = vmin
                    k0 += 1
                    if k0 > k:
                        break
                return
        umin += y[k + 1] - vmin
        if umin < minlam:
            while True:
                out[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = k0
            kminus = k
            kplus = k
            vmin = y[k]
            vmax = vmin + twolam
            umin = lam
            umax = minlam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            while True:
                out[k0] = vmax
                k0 += 1
                if k0 > kplus:
                    break
            k = k0
            kminus = k
            kplus = k
            vmax = y[k]
            vmin = vmax - twolam
            umin = lam
            umax = minlam
        else:
            k += 1
            if umin >= lam:
                kminus = k
                vmin += (umin - lam) / (kminus - k0 + 1)
                umin = lam
            if umax <= minlam:
                kplus = k
                vmax += (umax + lam) / (kplus - k0 + 1)
                umax = minlam


@njit(cache=True, nogil=True)
def project_l1_ball(v, radius, out):
    """Euclidean projection of ``v`` onto ``{x : ||x||_1 <= radius}``."""
    m = v.shape[0]
    tot = 0.0
    for j in range(m):
        tot += abs(v[j])
    if tot <= radius:
        for j in range(m):
            out[j] = v[j]
        return
    if radius <= 0.0:
        for j in range(m):
            out[j] = 0.0
        return
    u = np.sort(np.abs(v))[::-1]
    cs = 0.0
    theta = 0.0
    for j in range(m):
        cs += u[j]
        t = (cs - radius) / (j + 1)
        if u[j] - t > 0:
            theta = t
        else:
            break
    for j in range(m):
        a = abs(v[j]) - theta
        if a > 0:
            out[j] = a if v[j] > 0 else -a
        else:
            out[j] = 0.0


@njit(cache=True, nogil=True)
def prox_row(code, v, eta, lam, lam2, out):
    """Prox of a row-separable penalty on one row of W (in/out may alias)."""
    m = v.shape[0]
    if code == NONE:
        for j in range(m):
            out[j] = v[j]
    elif code == L2:
        sc = 1.0 / (1.0 + eta * lam)
        for j in range(m):
            out[j] = v[j] * sc
    elif code == L1:
        t = eta * lam
        for j in range(m):
            out[j] = _soft(v[j], t)
    elif code == ELASTIC:
        t = eta * lam
        sc = 1.0 / (1.0 + eta * lam2)
        for j in range(m):
            out[j] = _soft(v[j], t) * sc
    elif code == L1L2:
        nrm = 0.0
        for j in range(m):
            nrm += v[j] * v[j]
        nrm = math.sqrt(nrm)
        t = eta * lam
        sc = 1.0 - t / nrm if nrm > t else 0.0
        for j in range(m):
            out[j] = v[j] * sc
    elif code == L1LINF:
        proj = np.empty(m)
        project_l1_ball(v, eta * lam, proj)
        for j in range(m):
            out[j] = v[j] - proj[j]


@njit(cache=True, nogil=True)
def prox_matrix(code, V, eta, lam, lam2, lam3, out):
    """Prox of any penalty on a (p, k) matrix, written into ``out``."""
    p, k = V.shape
    if code == NONE or code == L2 or code == L1 or code == ELASTIC:
        for j in range(p):
            prox_row(code, V[j], eta, lam, lam2, out[j])
    elif code == L1L2 or code == L1LINF:
        for j in range(p):
            prox_row(code, V[j], eta, lam, lam2, out[j])
    elif code == FUSED:
        col = np.empty(p)
        tmp = np.empty(p)
        sc = 1.0 / (1.0 + eta * lam3)
        t = eta * lam2
        for c in range(k):
            for j in range(p):
                col[j] = V[j, c]
            tv1d_prox(col, eta * lam, tmp)
            for j in range(p):
                out[j, c] = _soft(tmp[j], t) * sc
    elif code == L1BALL:
        col = np.empty(p)
        tmp = np.empty(p)
        for c in range(k):
            for j in range(p):
                col[j] = V[j, c]
            project_l1_ball(col, lam, tmp)
            for j in range(p):
                out[j, c] = tmp[j]
    elif code == L2BALL:
        for c in range(k):
            nrm = 0.0
            for j in range(p):
                nrm += V[j, c] * V[j, c]
            nrm = math.sqrt(nrm)
            sc = lam / nrm if nrm > lam else 1.0
            for j in range(p):
                out[j, c] = V[j, c] * sc


@njit(cache=True, nogil=True)
def prox_matrix_aug(code, V, eta, lam, lam2, lam3, kappa, C, out):
    """Prox of ``psi + (kappa/2)||. - C||^2`` with step ``eta``."""
    if kappa == 0.0:
        prox_matrix(code, V, eta, lam, lam2, lam3, out)
        return
    a = 1.0 / (1.0 + eta * kappa)
    tmp = (V + (eta * kappa) * C) * a
    prox_matrix(code, tmp, eta * a, lam, lam2, lam3, out)


# ------------------------------------------------------------ public API

def _as_matrix(w):
    w = np.asarray(w, dtype=np.float64)
    if w.ndim == 1:
        return w[:, np.newaxis], True
    if w.ndim != 2:
        raise ValueError("weights must be a vector or a (p, k) matrix")
    return w, False


def penalty_value(cfg, w):
    """Value of the penalty at ``w``; ``inf`` when a constraint is violated."""
    W, _ = _as_matrix(w)
    code, lam, lam2, lam3 = cfg.params()
    if code == NONE:
        return 0.0
    if code == L2:
        return 0.5 * lam * float(np.sum(W * W))
    if code == L1:
        return lam * float(np.abs(W).sum())
    if code == ELASTIC:
        return lam * float(np.abs(W).sum()) + 0.5 * lam2 * float(np.sum(W * W))
    if code == FUSED:
        tv = float(np.abs(np.diff(W, axis=0)).sum())
        return (lam * tv + lam2 * float(np.abs(W).sum())
                + 0.5 * lam3 * float(np.sum(W * W)))
    if code == L1BALL:
        norms = np.abs(W).sum(axis=0)
        return 0.0 if np.all(norms <= lam * (1 + _FEAS_TOL) + 1e-15) else np.inf
    if code == L2BALL:
        norms = np.sqrt((W * W).sum(axis=0))
        return 0.0 if np.all(norms <= lam * (1 + _FEAS_TOL) + 1e-15) else np.inf
    if code == L1L2:
        return lam * float(np.sqrt((W * W).sum(axis=1)).sum())
    if code == L1LINF:
        return lam * float(np.abs(W).max(axis=1).sum())
    raise AssertionError(code)


def prox(cfg, v, eta):
    """``argmin_w 0.5||w - v||^2 + eta * psi(w)``; same shape as ``v``."""
    if not eta > 0:
        raise ValueError("prox step must be positive, got %r" % (eta,))
    V, vector = _as_matrix(v)
    out = np.empty_like(V)
    code, lam, lam2, lam3 = cfg.params()
    prox_matrix(code, np.ascontiguousarray(V), float(eta), lam, lam2, lam3,
                out)
    return out[:, 0] if vector else out


def prox_aug(cfg, v, eta, kappa, center):
    """Prox of ``psi + (kappa/2)||. - center||^2`` with step ``eta``."""
    V, vector = _as_matrix(v)
    C, _ = _as_matrix(center)
    out = np.empty_like(V)
    code, lam, lam2, lam3 = cfg.params()
    prox_matrix_aug(code, np.ascontiguousarray(V), float(eta), lam, lam2, lam3,
                    float(kappa), np.ascontiguousarray(C), out)
    return out[:, 0] if vector else out


def strong_convexity(cfg):
    """Modulus of the quadratic part of the penalty."""
    return split_quadratic(cfg)[0]


def split_quadratic(cfg):
    """Split ``psi = (mu/2)||w||^2 + residual``; returns ``(mu, residual)``."""
    code = cfg.code
    if code == L2:
        return cfg.lambd, PenaltyConfig("none")
    if code == ELASTIC:
        return cfg.lambd2, PenaltyConfig("l1", cfg.lambd)
    if code == FUSED:
        return cfg.lambd3, PenaltyConfig("fused-lasso", cfg.lambd, cfg.lambd2)
    return 0.0, cfg


@njit(cache=True)
def _fused_dual_feasible(g, lam, lam2):
    # is g in lam * D^T B_inf + lam2 * B_inf (subdifferential at zero)?
    p = g.shape[0]
    lo = 0.0
    hi = 0.0
    G = 0.0
    for j in range(p):
        G += g[j]
        lo -= lam2
        hi += lam2
        if j < p - 1:
            lo = max(lo, G - lam)
            hi = min(hi, G + lam)
            if lo > hi + 1e-15:
                return False
        else:
            return lo - 1e-15 <= G <= hi + 1e-15
    return True


def _fused_scale(g, lam, lam2):
    if not np.any(g):
        return 1.0
    if _fused_dual_feasible(g, lam, lam2):
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _fused_dual_feasible(mid * g, lam, lam2):
            lo = mid
        else:
            hi = mid
    return lo


def conjugate_certificate(cfg, g):
    """Dual-feasibility scale and conjugate value for a dual direction ``g``.

    Returns ``(s, value)`` with ``s`` in [0, 1] the largest scaling that
    keeps ``s * g`` in the conjugate's domain and ``value = psi*(s * g)``.
    Norm-like penalties have an indicator conjugate (value 0 inside).
    """
    G, _ = _as_matrix(g)
    code, lam, lam2, lam3 = cfg.params()

    def scale_for(dual_norm):
        if dual_norm <= lam:
            return 1.0
        return lam / dual_norm

    if code == NONE or cfg.is_trivial:
        return 1.0, (0.0 if np.abs(G).max(initial=0.0) <= 1e-12 else np.inf)
    if code == L2:
        return 1.0, float(np.sum(G * G)) / (2.0 * lam)
    if code == L1:
        return scale_for(float(np.abs(G).max())), 0.0
    if code == ELASTIC:
        if lam2 > 0:
            ex = np.maximum(np.abs(G) - lam, 0.0)
            return 1.0, float(np.sum(ex * ex)) / (2.0 * lam2)
        return scale_for(float(np.abs(G).max())), 0.0
    if code == FUSED:
        if lam3 > 0:
            # (h + mu/2 ||.||^2)^*(g) = <g, w> - h(w) - mu/2 ||w||^2 at
            # w = prox_{h/mu}(g/mu)
            h = PenaltyConfig("fused-lasso", lam, lam2)
            Wst = prox(h, G / lam3, 1.0 / lam3)
            val = (float(np.sum(G * Wst)) - penalty_value(h, Wst)
                   - 0.5 * lam3 * float(np.sum(Wst * Wst)))
            return 1.0, max(val, 0.0)
        s = min(_fused_scale(np.ascontiguousarray(G[:, c]), lam, lam2)
                for c in range(G.shape[1]))
        return s, 0.0
    if code == L1BALL:
        return 1.0, lam * float(np.abs(G).max(axis=0).sum())
    if code == L2BALL:
        return 1.0, lam * float(np.sqrt((G * G).sum(axis=0)).sum())
    if code == L1L2:
        return scale_for(float(np.sqrt((G * G).sum(axis=1)).max())), 0.0
    if code == L1LINF:
        return scale_for(float(np.abs(G).sum(axis=1).max())), 0.0
    raise AssertionError(code)
