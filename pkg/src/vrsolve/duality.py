"""Primal values, Fenchel dual candidates and the relative-gap stopping rule.

For a fixed intercept b the dual of
``(1/n) sum_i loss(y_i, x_i^T W + b) + psi(W)`` is

    D(U) = -(1/n) sum_i [loss*(y_i, u_i) - u_i . b] - psi*(-(1/n) X^T U)

and any U gives ``D(U) <= P(W)``. The candidate is the loss derivative at
the current scores, rescaled so that ``psi*`` is finite. The intercept is
re-optimized before each evaluation so that the fixed-b gap also
certifies the joint problem.
"""
import csv
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import losses
from .logs import SILENT, epoch_line, gap_line
from .losses import MULTICLASS
from .penalties import conjugate_certificate, penalty_value

__all__ = [
    "GapReport",
    "Trace",
    "GapTracker",
    "NumericalFailure",
    "primal",
    "optimize_intercept",
    "dual_candidate",
    "duality_gap",
    "should_stop",
]


class NumericalFailure(RuntimeError):
    """Raised when an iterate diverges."""


@dataclass
class GapReport:
    """One certificate evaluation.

    ``relative_gap`` is ``gap / max(|primal|, 1e-12)``. Without a finite
    dual certificate (``certified`` false, e.g. penalty ``none``) it holds
    the relative gradient norm ``||grad F|| / max(|F|, 1)`` instead and
    ``dual`` is ``-inf``.
    """

    primal: float
    dual: float
    gap: float
    relative_gap: float
    best_relative_gap: float = np.inf
    epoch: int = 0
    elapsed: float = 0.0
    certified: bool = True
    intercept: np.ndarray = field(default=None, repr=False)


class Trace:
    """Sequence of gap reports of one run."""

    def __init__(self):
        self.records = []

    def append(self, report):
        self.records.append(report)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def last(self):
        return self.records[-1] if self.records else None

    def rows(self):
        return [(r.epoch, r.elapsed, r.primal, r.best_relative_gap)
                for r in self.records]

    _FIELDS = ("epoch", "elapsed", "primal", "dual", "gap", "relative_gap",
               "best_relative_gap", "certified")

    def to_records(self):
        """Plain dicts of every report, without the intercept."""
        return [{f: _plain(getattr(r, f)) for f in self._FIELDS}
                for r in self.records]

    @classmethod
    def from_records(cls, records):
        trace = cls()
        for rec in records:
            trace.append(GapReport(**{f: rec[f] for f in cls._FIELDS}))
        return trace

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "seconds", "primal", "relative_gap"])
            for epoch, sec, prim, gap in self.rows():
                w.writerow([epoch, repr(sec), repr(prim), repr(gap)])


def _plain(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return float(v)


def primal(problem, W, b):
    """Objective value; ``inf`` if a constraint is violated."""
    return problem.primal(W, b)


@njit(cache=True, nogil=True)
def _column_value(code, Y, Z, c, bc):
    acc = 0.0
    for i in range(Z.shape[0]):
        acc += losses.scalar_value(code, Y[i, c], Z[i, c] + bc)
    return acc / Z.shape[0]


@njit(cache=True, nogil=True)
def _newton_columns(code, Y, Z, b, maxit, tol):
    n, k = Z.shape
    for c in range(k):
        bc = b[c]
        f = _column_value(code, Y, Z, c, bc)
        for _ in range(maxit):
            g = 0.0
            h = 0.0
            for i in range(n):
                s = Z[i, c] + bc
                g += losses.scalar_derivative(code, Y[i, c], s)
                h += losses.scalar_curvature(code, Y[i, c], s)
            g /= n
            h /= n
            if abs(g) <= tol:
                break
            step = g / max(h, 1e-12)
            t = 1.0
            accepted = False
            while t > 1e-12:
                bn = bc - t * step
                fn = _column_value(code, Y, Z, c, bn)
                if fn <= f - 1e-4 * t * step * g:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                break
            bc = bn
            f = fn
            if abs(t * step) <= tol * (1.0 + abs(bc)):
                break
        b[c] = bc


def _newton_multiclass(Y, Z, b, maxit, tol):
    n, k = Z.shape
    cls = Y[:, 0].astype(np.int64)
    onehot = np.zeros((n, k))
    onehot[np.arange(n), cls] = 1.0

    def value(bv):
        S = Z + bv
        m = S.max(axis=1, keepdims=True)
        return float(np.mean(m[:, 0] + np.log(np.exp(S - m).sum(axis=1))
                             - S[np.arange(n), cls]))

    f = value(b)
    for _ in range(maxit):
        S = Z + b
        P = np.exp(S - S.max(axis=1, keepdims=True))
        P /= P.sum(axis=1, keepdims=True)
        g = (P - onehot).mean(axis=0)
        if np.abs(g).max() <= tol:
            break
        H = np.diag(P.mean(axis=0)) - P.T @ P / n
        step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        while t > 1e-12:
            bn = b - t * step
            fn = value(bn)
            if fn <= f - 1e-4 * t * float(step @ g):
                break
            t *= 0.5
        else:
            break
        b, f = bn, fn
        if np.abs(t * step).max() <= tol * (1.0 + np.abs(b).max()):
            break
    return b


def optimize_intercept(problem, Z, b0, maxit=20, tol=1e-12):
    """Exact minimization over the intercept given scores ``Z = X W``."""
    b = np.array(b0, dtype=np.float64, copy=True)
    if problem.loss_code == MULTICLASS:
        return _newton_multiclass(problem.Y, Z, b, maxit, tol)
    _newton_columns(problem.loss_code, problem.Y, Z, b, maxit, tol)
    return b


def dual_candidate(problem, W, b):
    """Scaled dual variables ``U`` (n, k) plus the scale and ``psi*`` value.

    Returns ``(U, s, psi_conj, G)`` where ``G = -(1/n) X^T U0`` is the
    unscaled dual direction for the penalty.
    """
    S = problem.scores(W, b)
    U = np.empty_like(S)
    losses.batch_value_derivative(problem.loss_code, problem.Y, S, U)
    G = -problem.X.gradient(U) / problem.n
    s, conj = conjugate_certificate(problem.penalty, G)
    return U * s, s, conj, G


def duality_gap(problem, W, b=None, reoptimize_intercept=True):
    """Certificate at ``(W, b)``; the intercept is re-optimized first."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim == 1:
        W = W[:, np.newaxis]
    if b is None or not problem.fit_intercept:
        b = np.zeros(problem.k)
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    Z = problem.X.scores(W)
    if problem.fit_intercept and reoptimize_intercept:
        b = optimize_intercept(problem, Z, b)
    S = Z + b if problem.fit_intercept else Z
    D = np.empty_like(S)
    fit = losses.batch_value_derivative(problem.loss_code, problem.Y, S, D)
    fit /= problem.n
    P = fit + penalty_value(problem.penalty, W)
    if problem.penalty.is_trivial:
        gW = problem.X.gradient(D) / problem.n
        gb = D.sum(axis=0) / problem.n if problem.fit_intercept else 0.0
        gn = float(np.sqrt(np.sum(gW * gW) + np.sum(np.square(gb))))
        rel = gn / max(abs(P), 1.0)
        return GapReport(P, -np.inf, np.inf, rel, certified=False,
                         intercept=b)
    G = -problem.X.gradient(D) / problem.n
    s, conj = conjugate_certificate(problem.penalty, G)
    U = D * s
    lc = losses.batch_conjugate(problem.loss_code, problem.Y, U)
    if problem.fit_intercept:
        lc -= float(np.sum(U.sum(axis=0) * b))
    dual = -lc / problem.n - conj
    gap = P - dual
    rel = gap / max(abs(P), 1e-12)
    return GapReport(P, dual, gap, rel, intercept=b)


def should_stop(report, tol):
    """True once the best relative gap seen so far is at most ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    return report.best_relative_gap <= tol


class GapTracker:
    """Evaluates certificates at checkpoints, keeps the best iterate, logs.

    The best relative gap is a running minimum; the iterate achieving it
    is kept so that a run always returns a certified point.
    """

    def __init__(self, problem, tol, log=SILENT, t0=None):
        self.problem = problem
        self.tol = tol
        self.log = log
        self.t0 = time.perf_counter() if t0 is None else t0
        self.trace = Trace()
        self.best = np.inf
        self.best_W = None
        self.best_b = None
        self.initial_primal = None

    def start(self, W, b):
        self.initial_primal = self.problem.primal(W, b)

    def elapsed(self):
        return time.perf_counter() - self.t0

    def evaluate(self, W, b, epoch):
        rep = duality_gap(self.problem, W, b)
        self._check_divergence(rep.primal)
        if rep.relative_gap < self.best or self.best_W is None:
            self.best = min(rep.relative_gap, self.best)
            self.best_W = np.array(W, copy=True)
            self.best_b = np.array(rep.intercept, copy=True)
        rep.best_relative_gap = self.best
        rep.epoch = epoch
        rep.elapsed = self.elapsed()
        self.trace.append(rep)
        self.log(epoch_line(epoch, rep.primal, rep.elapsed))
        self.log(gap_line(self.best))
        return rep

    @property
    def converged(self):
        return self.best <= self.tol

    def _check_divergence(self, value):
        p0 = self.initial_primal
        if p0 is None or not np.isfinite(p0):
            return
        if not np.isfinite(value) and not np.isinf(value):
            raise NumericalFailure("primal objective is NaN")
        if value > 10.0 * abs(p0) + 1e-8:
            raise NumericalFailure(
                "primal objective %g exceeds 10x its initial value %g"
                % (value, p0))
