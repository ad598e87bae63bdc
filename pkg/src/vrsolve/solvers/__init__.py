"""Solver registry: plain, Catalyst-wrapped and QNing-wrapped variants."""
from ..logs import SILENT
from .accelerators import catalyst, choose_kappa, qning
from .base import FitResult, InnerSolver, SolverParams, minimize
from .deterministic import FISTA, ISTA
from .incremental import MISO, SVRG, AccSVRG

__all__ = [
    "SOLVERS",
    "SolverParams",
    "FitResult",
    "InnerSolver",
    "ISTA",
    "FISTA",
    "SVRG",
    "AccSVRG",
    "MISO",
    "solve",
    "catalyst",
    "qning",
    "choose_kappa",
]

SOLVERS = ("ista", "fista", "qning-ista", "miso", "catalyst-miso",
           "qning-miso", "svrg", "catalyst-svrg", "qning-svrg", "acc-svrg")

_INNER = {"ista": ISTA, "fista": FISTA, "miso": MISO, "svrg": SVRG,
          "acc-svrg": AccSVRG}


def effective_mu(problem):
    """Strong convexity available to MISO; the intercept contributes none."""
    return 0.0 if problem.fit_intercept else problem.mu


def solve(problem, solver, params=None, W0=None, b0=None, log=SILENT):
    """Run the named solver on ``problem``; returns a :class:`FitResult`.

    A bare ``miso`` without strong convexity is run as ``catalyst-miso``;
    a QNing variant whose default ``kappa`` is zero runs the plain solver.
    """
    params = params or SolverParams()
    if solver not in SOLVERS:
        raise ValueError("unknown solver %r; valid names: %s"
                         % (solver, ", ".join(SOLVERS + ("auto",))))
    accel, _, base = solver.rpartition("-")
    if solver == "acc-svrg":
        accel, base = "", "acc-svrg"
    if base == "miso" and not accel and effective_mu(problem) <= 0:
        log("miso needs strong convexity: using catalyst-miso")
        accel = "catalyst"
    if not accel:
        inner = _INNER[base](problem, params)
        return minimize(inner, problem, params, W0, b0, log=log)
    inner = _INNER[base](problem, params)
    if params.kappa is not None:
        kappa = params.kappa
    else:
        kappa = choose_kappa(base, problem.L, effective_mu(problem), problem.n)
    if accel == "catalyst":
        return catalyst(inner, problem, params, kappa, W0, b0, log=log)
    if kappa <= 0:
        # already well conditioned for the inner solver
        log("kappa is zero: running %s without QNing" % base)
        return minimize(inner, problem, params, W0, b0, log=log, name=solver)
    return qning(inner, problem, params, kappa, W0, b0, log=log)
