"""Variance-reduced incremental solvers with uniform sampling.

* :class:`SVRG` -- prox-SVRG whose anchor is refreshed with probability
  1/n after every step instead of once per fixed-length loop.
* :class:`AccSVRG` -- the same updates taken at an extrapolated point.
* :class:`MISO` -- incremental lower-bound minimization; each example keeps
  one damped loss derivative per output.
"""
import math
import warnings

import numpy as np

from ..penalties import L2, NONE, ROW_SEPARABLE
from . import _kernels as K
from .base import InnerSolver


class SVRG(InnerSolver):
    """Non-cyclic prox-SVRG with step ``1/(3L)``.

    Every inner step costs two gradient evaluations and every anchor
    refresh n more, i.e. three per step on average.
    """

    name = "svrg"
    banner = ("SVRG Solver", "Incremental Solver with uniform sampling")
    incremental = True
    beta = 0.0

    def __init__(self, problem, params):
        super().__init__(problem, params)
        self.rng = np.random.default_rng(params.seed)
        self.eta = params.step_size or 1.0 / (3.0 * problem.L)
        self.counters = np.zeros(3, dtype=np.int64)
        self._init_evals = 0

    @property
    def grad_evals(self):
        return int(self.counters[0]) + self._init_evals

    @grad_evals.setter
    def grad_evals(self, value):
        self._init_evals = value

    @property
    def touched(self):
        return int(self.counters[1])

    @property
    def refreshes(self):
        return int(self.counters[2])

    def start(self, W0, b0):
        prob = self.problem
        self.W = np.array(W0, dtype=np.float64, copy=True)
        self.b = np.array(b0, dtype=np.float64, copy=True)
        self.Wa = self.W.copy()
        self.ba = self.b.copy()
        self.G = np.zeros_like(self.W)
        self.Gb = np.zeros_like(self.b)
        K.full_gradient(*prob.X.kernel_args(), prob.Y, prob.loss_code,
                        self.Wa, self.ba, prob.fit_intercept, self.G, self.Gb)
        self._init_evals += prob.n

    def _lazy(self):
        return (self.problem.X.is_sparse
                and self.problem.penalty.code in (NONE, L2))

    def _epoch(self, kappa, Cw, Cb):
        prob = self.problem
        n = prob.n
        code, lam, lam2, lam3 = prob.penalty.params()
        idx = self.rng.integers(0, n, size=n)
        refresh = self.rng.random(n) < 1.0 / n
        K.svrg_epoch(*prob.X.kernel_args(), prob.Y, prob.loss_code,
                     self.W, self.b, self.Wa, self.ba, self.G, self.Gb,
                     prob.fit_intercept, self.eta, code, lam, lam2, lam3,
                     float(kappa), Cw, Cb, idx, refresh, self._lazy(),
                     self.counters)

    def run(self, n_epochs, kappa=0.0, center=None):
        Cw, Cb = self._center(kappa, center)
        for _ in range(n_epochs):
            self._epoch(kappa, Cw, Cb)


class AccSVRG(SVRG):
    """SVRG epochs started from the extrapolated point ``W + beta (W - W_prev)``.

    ``W_prev`` is the iterate at the start of the previous epoch and
    ``beta = (1 - sqrt(q)) / (1 + sqrt(q))`` with ``q = mu / (mu + 1/(n eta))``:
    one epoch of n steps of size ``eta`` acts like a single gradient step
    of size ``n eta``. Momentum on every single-example step is unstable
    for any ``beta`` near one. Without strong convexity it falls back to
    plain SVRG.
    """

    name = "acc-svrg"
    banner = ("Accelerated SVRG Solver",
              "Incremental Solver with uniform sampling")

    def __init__(self, problem, params):
        super().__init__(problem, params)
        mu = problem.mu
        if mu <= 0:
            warnings.warn("acc-svrg needs a strongly convex penalty; "
                          "running plain svrg", RuntimeWarning, stacklevel=2)
            self.beta = 0.0
            self.name = "svrg"
            self.banner = SVRG.banner
        else:
            q = mu / (mu + 1.0 / (problem.n * self.eta))
            self.beta = (1.0 - math.sqrt(q)) / (1.0 + math.sqrt(q))

    def start(self, W0, b0):
        super().start(W0, b0)
        self._mark()

    def warm_start(self, W, b):
        super().warm_start(W, b)
        self._mark()

    def _mark(self):
        self.Wk = self.W.copy()
        self.bk = self.b.copy()

    def run(self, n_epochs, kappa=0.0, center=None):
        Cw, Cb = self._center(kappa, center)
        for _ in range(n_epochs):
            if self.beta > 0.0:
                Wy = self.W + self.beta * (self.W - self.Wk)
                by = self.b + self.beta * (self.b - self.bk)
                self._mark()
                self.W[...] = Wy
                self.b[...] = by
            self._epoch(kappa, Cw, Cb)


class MISO(InnerSolver):
    """MISO with the quadratic part of the penalty fused into each term.

    With ``mu`` the fused strong convexity (plus ``kappa`` under an
    accelerator) the iterate is ``prox_{res/mu}((kappa C - A/n) / mu)``
    where ``A = sum_i x_i alpha_i^T`` and ``res`` is the penalty minus
    its quadratic part. Derivatives are damped with
    ``delta = min(1, n mu / (2 L))``. The unregularized intercept is only
    strongly convex through ``kappa``, so it needs an accelerator.
    """

    name = "miso"
    banner = ("MISO Solver", "Incremental Solver with uniform sampling")
    incremental = True

    def __init__(self, problem, params):
        super().__init__(problem, params)
        self.rng = np.random.default_rng(params.seed)
        self.counters = np.zeros(2, dtype=np.int64)
        self._init_evals = 0

    @property
    def grad_evals(self):
        return int(self.counters[0]) + self._init_evals

    @grad_evals.setter
    def grad_evals(self, value):
        self._init_evals = value

    @property
    def touched(self):
        return int(self.counters[1])

    def start(self, W0, b0):
        prob = self.problem
        n, k = prob.n, prob.k
        self.W = np.array(W0, dtype=np.float64, copy=True)
        self.b = np.array(b0, dtype=np.float64, copy=True)
        self.Ab = np.zeros(k)
        if np.any(self.W) or np.any(self.b):
            args = prob.X.kernel_args()
            self.alpha = K.all_derivatives(*args, prob.Y, prob.loss_code,
                                           self.W, self.b, prob.fit_intercept)
            self.A = K.miso_accumulate(*args, self.alpha, prob.p)
            self.Ab = self.alpha.sum(axis=0)
            self._init_evals += n
        else:
            self.alpha = np.zeros((n, k))
            self.A = np.zeros((prob.p, k))

    def warm_start(self, W, b):
        # the iterate is a function of the stored derivatives and the center
        pass

    def strong_convexity(self, kappa):
        return self.problem.mu + kappa

    def damping(self, kappa):
        mu = self.strong_convexity(kappa)
        return min(1.0, self.problem.n * mu / (2.0 * self.problem.L))

    def run(self, n_epochs, kappa=0.0, center=None):
        prob = self.problem
        mu = self.strong_convexity(kappa)
        if mu <= 0:
            raise ValueError("miso needs a strongly convex objective "
                             "(mu + kappa > 0); wrap it in an accelerator")
        if prob.fit_intercept and kappa <= 0:
            raise ValueError("miso with an intercept needs kappa > 0")
        Cw, Cb = self._center(kappa, center)
        delta = self.damping(kappa)
        rcode, rlam, rlam2, rlam3 = prob.residual.params()
        row_sep = rcode in ROW_SEPARABLE
        n = prob.n
        K.miso_refresh_weights(self.A, self.Ab, n, mu, float(kappa), Cw, Cb,
                               prob.fit_intercept, rcode, rlam, rlam2, rlam3,
                               self.W, self.b)
        for _ in range(n_epochs):
            idx = self.rng.integers(0, n, size=n)
            K.miso_epoch(*prob.X.kernel_args(), prob.Y, prob.loss_code,
                         self.W, self.b, self.A, self.Ab, self.alpha,
                         prob.fit_intercept, mu, float(kappa), Cw, Cb, delta,
                         rcode, rlam, rlam2, rlam3, row_sep, idx,
                         self.counters)

    def drift(self):
        """Relative gap between the running and a from-scratch ``A``."""
        A = K.miso_accumulate(*self.problem.X.kernel_args(), self.alpha,
                              self.problem.p)
        scale = max(float(np.abs(A).max()), 1e-300)
        return float(np.abs(A - self.A).max()) / scale
