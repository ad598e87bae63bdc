"""Solver parameters, results and the checkpointing driver loop."""
import time
from dataclasses import dataclass, field

import numpy as np

from ..duality import GapTracker, Trace
from ..logs import SILENT, elapsed_line, lipschitz_line
from ..losses import BANNERS as LOSS_BANNERS


@dataclass
class SolverParams:
    """Run configuration shared by all solvers.

    ``it0`` is the number of epochs between two certificate evaluations.
    ``kappa`` and ``step_size`` override the computed defaults;
    ``inner_epochs`` is the per-subproblem budget of the accelerators.
    """

    max_epochs: int = 500
    tol: float = 1e-3
    it0: int = 10
    seed: int = 0
    lipschitz_init: float = None
    minibatch: int = 1
    memory: int = 20
    kappa: float = None
    step_size: float = None
    inner_epochs: int = 1

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.it0 < 1:
            raise ValueError("it0 must be >= 1")
        if self.memory < 0:
            raise ValueError("memory must be >= 0")
        if self.minibatch != 1:
            raise NotImplementedError("only minibatch=1 is implemented")


@dataclass
class FitResult:
    W: np.ndarray
    b: np.ndarray
    trace: Trace
    epochs: int
    converged: bool
    solver: str
    grad_evals: int = 0
    line_search_steps: int = 0
    skipped_steps: int = 0
    elapsed: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def relative_gap(self):
        last = self.trace.last
        return np.inf if last is None else last.best_relative_gap


class InnerSolver:
    """Stateful solver that can advance by whole epochs.

    ``run`` accepts an optional proximal term ``(kappa/2)||W - C||^2``
    (and ``(kappa/2)||b - Cb||^2``) added to the objective, which is how the
    accelerators drive it.
    """

    name = "Solver"
    banner = ()
    incremental = False

    def __init__(self, problem, params):
        self.problem = problem
        self.params = params
        self.grad_evals = 0
        self.W = None
        self.b = None

    def start(self, W0, b0):
        raise NotImplementedError

    def run(self, n_epochs, kappa=0.0, center=None):
        raise NotImplementedError

    def warm_start(self, W, b):
        """Move the iterate to ``(W, b)`` before a new subproblem."""
        self.W = np.array(W, dtype=np.float64, copy=True)
        self.b = np.array(b, dtype=np.float64, copy=True)

    def header(self, log):
        for line in self.banner:
            log(line)
        log(lipschitz_line(self.problem.L))
        log(LOSS_BANNERS[self.problem.loss_code])
        log(self.problem.penalty.banner)

    def _center(self, kappa, center):
        if center is None or kappa == 0.0:
            Z = np.zeros_like(self.W)
            return Z, np.zeros_like(self.b)
        return center


def initial_point(problem, W0, b0):
    W, b = problem.zeros()
    if W0 is not None:
        W[...] = np.asarray(W0, dtype=np.float64).reshape(W.shape)
    if b0 is not None and problem.fit_intercept:
        b[...] = np.asarray(b0, dtype=np.float64).reshape(b.shape)
    return W, b


class Checkpoints:
    """Epoch bookkeeping for evaluations every ``it0`` epochs."""

    def __init__(self, params):
        self.it0 = params.it0
        self.max_epochs = params.max_epochs
        self.epoch = 0
        self.next_check = params.it0
        self.last_eval = -1

    def advance(self, n):
        self.epoch += n

    @property
    def due(self):
        return self.epoch >= self.next_check or self.exhausted

    @property
    def exhausted(self):
        return self.epoch >= self.max_epochs

    def mark(self):
        self.last_eval = self.epoch
        while self.next_check <= self.epoch:
            self.next_check += self.it0

    def until_next(self):
        return max(1, min(self.next_check, self.max_epochs) - self.epoch)


def minimize(solver, problem, params, W0=None, b0=None, log=SILENT,
             name=None):
    """Run an inner solver on the original problem until certified.

    The certificate is evaluated every ``it0`` epochs and at the end of
    the budget; the returned point is the best-certified iterate.
    """
    t0 = time.perf_counter()
    W, b = initial_point(problem, W0, b0)
    solver.header(log)
    solver.start(W, b)
    tracker = GapTracker(problem, params.tol, log=log, t0=t0)
    tracker.start(solver.W, solver.b)
    cp = Checkpoints(params)
    while not cp.exhausted:
        step = cp.until_next()
        solver.run(step)
        cp.advance(step)
        if cp.due:
            tracker.evaluate(solver.W, solver.b, cp.epoch)
            cp.mark()
            if tracker.converged:
                break
    elapsed = time.perf_counter() - t0
    log(elapsed_line(elapsed))
    return FitResult(tracker.best_W, tracker.best_b, tracker.trace, cp.epoch,
                     tracker.converged, name or solver.name,
                     grad_evals=solver.grad_evals, elapsed=elapsed)
