"""Full-gradient composite solvers: ISTA with backtracking, and FISTA."""
import math

import numpy as np

from ..penalties import prox_aug
from .base import InnerSolver

# relative slack in the sufficient-decrease test against rounding noise
_LS_SLACK = 1e-12
# below this relative change in f the value test is unreliable
_LS_NOISE = 1e-6


class ISTA(InnerSolver):
    """Proximal gradient descent with a backtracking Lipschitz estimate.

    Each epoch is one accepted step. The trial constant starts from half
    the last accepted value and doubles until the quadratic upper model
    holds, so the accepted value stays below twice the global constant.
    """

    name = "ista"
    banner = ("ISTA Solver",)
    accelerated = False

    def __init__(self, problem, params):
        super().__init__(problem, params)
        self.Lt = params.lipschitz_init or problem.L
        self.line_search_trials = 0
        self.accepted_L = []
        self._center_key = None

    def start(self, W0, b0):
        self.W = np.array(W0, dtype=np.float64, copy=True)
        self.b = np.array(b0, dtype=np.float64, copy=True)
        self._reset_momentum()

    def warm_start(self, W, b):
        super().warm_start(W, b)
        self._reset_momentum()

    def _reset_momentum(self):
        self.t = 1.0
        self.Yw = self.W.copy()
        self.Yb = self.b.copy()

    def run(self, n_epochs, kappa=0.0, center=None):
        prob = self.problem
        Cw, Cb = self._center(kappa, center)
        key = (kappa, id(center))
        if self.accelerated and key != self._center_key:
            self._reset_momentum()
        self._center_key = key
        for _ in range(n_epochs):
            if self.accelerated:
                Pw, Pb = self.Yw, self.Yb
            else:
                Pw, Pb = self.W, self.b
            f, gW, gb = prob.fit_value_grad(Pw, Pb)
            self.grad_evals += prob.n
            Lt = self.Lt
            while True:
                eta = 1.0 / Lt
                Wn = prox_aug(prob.penalty, Pw - eta * gW, eta, kappa, Cw)
                if prob.fit_intercept:
                    bn = (Pb - eta * gb + eta * kappa * Cb) / (1.0 + eta * kappa)
                else:
                    bn = Pb
                fn = prob.fit_value(prob.scores(Wn, bn))
                dW = Wn - Pw
                db = bn - Pb
                dd = float(np.sum(dW * dW)) + float(np.sum(db * db))
                self.line_search_trials += 1
                if abs(fn - f) > _LS_NOISE * abs(f):
                    model = (f + float(np.sum(gW * dW))
                             + float(np.sum(gb * db)) + 0.5 * Lt * dd)
                    ok = fn <= model + _LS_SLACK * abs(f)
                else:
                    # value differences are rounding noise here: compare
                    # the curvature along the step instead
                    _, gW2, gb2 = prob.fit_value_grad(Wn, bn)
                    self.grad_evals += prob.n
                    curv = (float(np.sum((gW2 - gW) * dW))
                            + float(np.sum((gb2 - gb) * db)))
                    ok = curv <= Lt * dd
                if ok or Lt > 1e20:
                    break
                Lt *= 2.0
            self.accepted_L.append(Lt)
            self.Lt = 0.5 * Lt
            if self.accelerated:
                t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * self.t * self.t))
                mom = (self.t - 1.0) / t_next
                self.Yw = Wn + mom * (Wn - self.W)
                self.Yb = bn + mom * (bn - self.b)
                self.t = t_next
            self.W = Wn
            self.b = np.array(bn, dtype=np.float64, copy=True)


class FISTA(ISTA):
    """ISTA with Nesterov momentum ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2``."""

    name = "fista"
    banner = ("FISTA Solver",)
    accelerated = True
