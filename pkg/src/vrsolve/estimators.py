"""Estimators: problem assembly, the ``auto`` policy, one-vs-all and models.

The four estimator classes share :func:`fit`; a fitted :class:`Model`
predicts and persists itself in a small versioned text format::

    VRSOLVE-MODEL
    version: 1
    <key>: <value>          one line per header field
    weights: <base64 of little-endian W, row-major (p, k)>
    intercept: <base64 of little-endian b (k,)>
    traces: <json list of per-subproblem gap reports>
    checksum: <sha256 hex of every preceding byte>
    end
"""
import base64
import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from .data_matrix import DataMatrix
from .duality import Trace
from .logs import SILENT, Printer, elapsed_line, matrix_line
from .losses import LOSSES, MULTICLASS, loss_code
from .penalties import L1L2, L1LINF, PenaltyConfig
from .problem import Problem
from .solvers import SOLVERS, SolverParams, solve

__all__ = [
    "TASKS",
    "EstimatorConfig",
    "Model",
    "ModelFormatError",
    "OneVsAllError",
    "auto_select",
    "fit",
    "one_vs_all",
    "predict",
    "decision_function",
    "save",
    "load",
    "BinaryClassifier",
    "Regression",
    "MultiVariateRegression",
    "MultiClassifier",
]

TASKS = ("binary-classifier", "regression", "multivariate-regression",
         "multiclassifier")

_UNIVARIATE = ("square", "logistic", "sqhinge", "safe-logistic")
_TASK_LOSSES = {
    "binary-classifier": _UNIVARIATE,
    "regression": ("square",),
    "multivariate-regression": ("square",),
    "multiclassifier": _UNIVARIATE + ("multiclass-logistic",),
}

FORMAT_VERSION = 1
_MAGIC = "VRSOLVE-MODEL"


class ModelFormatError(ValueError):
    """Unreadable, truncated or incompatible model file."""


class OneVsAllError(RuntimeError):
    """A per-class subproblem failed; ``klass`` is its index."""

    def __init__(self, klass, label, cause):
        super().__init__("one-vs-all: class %d (label %r) failed: %s"
                         % (klass, label, cause))
        self.klass = klass
        self.label = label


def _canonical_loss(name):
    code = loss_code(name)
    return next(k for k, v in LOSSES.items() if v == code)


@dataclass
class EstimatorConfig:
    """What to fit and how.

    ``solver`` is one of the registered solvers or ``'auto'``.
    """

    task: str = "binary-classifier"
    loss: str = "logistic"
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    fit_intercept: bool = False
    solver: str = "auto"
    params: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError("unknown task %r; valid names: %s"
                             % (self.task, ", ".join(TASKS)))
        self.loss = _canonical_loss(self.loss)
        if self.loss not in _TASK_LOSSES[self.task]:
            raise ValueError("loss %r is not available for %s; valid names: %s"
                             % (self.loss, self.task,
                                ", ".join(_TASK_LOSSES[self.task])))
        if self.solver != "auto" and self.solver not in SOLVERS:
            raise ValueError("unknown solver %r; valid names: %s"
                             % (self.solver, ", ".join(SOLVERS + ("auto",))))


@dataclass
class Model:
    """Fitted linear model; ``W`` is (p, k) and ``b`` is (k,).

    ``classes`` holds the label values of the columns (classification
    only): ``[neg, pos]`` for binary tasks, one value per column for
    multiclass. ``traces`` has one entry per solved subproblem.
    """

    W: np.ndarray
    b: np.ndarray
    config: EstimatorConfig
    traces: list
    classes: np.ndarray = None
    solver: str = ""
    epochs: int = 0
    converged: bool = False
    format_version: int = FORMAT_VERSION

    @property
    def w(self):
        """Weight vector of a single-output model."""
        if self.W.shape[1] != 1:
            raise ValueError("model has %d outputs" % self.W.shape[1])
        return self.W[:, 0]

    @property
    def trace(self):
        return self.traces[0] if len(self.traces) == 1 else self.traces

    @property
    def relative_gap(self):
        """Worst final best relative gap over the subproblems."""
        gaps = [t.last.best_relative_gap for t in self.traces if t.last]
        return max(gaps) if gaps else np.inf

    def decision_function(self, X):
        return decision_function(self, X)

    def predict(self, X):
        return predict(self, X)

    def save(self, path):
        save(self, path)


def auto_select(n, p, L, mu):
    """Concrete solver for ``'auto'`` from the problem statistics."""
    if n <= 1000 or p >= n:
        return "qning-ista"
    if mu * n / L < 0.01:
        return "catalyst-miso"
    return "qning-miso"


def _as_data(X):
    return X if isinstance(X, DataMatrix) else DataMatrix(X)


def _binary_labels(y, log):
    y = np.asarray(y, dtype=np.float64).ravel()
    vals = np.unique(y)
    if np.all(np.isin(vals, (-1.0, 1.0))):
        return y, np.array([-1.0, 1.0])
    if np.all(np.isin(vals, (0.0, 1.0))):
        log("Binary labels in {0,1} are mapped to {-1,+1}")
        return 2.0 * y - 1.0, np.array([0.0, 1.0])
    raise ValueError("binary labels must be in {-1,+1} or {0,1}, got %s"
                     % vals[:5])


def _class_indices(y):
    y = np.asarray(y).ravel()
    classes, idx = np.unique(y, return_inverse=True)
    return classes, idx


def _one_hot_signs(idx, k):
    Y = -np.ones((idx.shape[0], k))
    Y[np.arange(idx.shape[0]), idx] = 1.0
    return Y


def _resolve(config, problem):
    if config.solver != "auto":
        return config.solver
    return auto_select(problem.n, problem.p, problem.L, problem.mu)


def _run(config, problem, params, log):
    solver = _resolve(config, problem)
    return solve(problem, solver, params, log=log), solver


def _pool_size(k):
    env = os.environ.get("VRSOLVE_THREADS")
    cores = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cores, k))


def one_vs_all(config, data, labels, log=SILENT, n_threads=None):
    """k independent binary problems, class j against the rest.

    Subproblem j uses seed ``params.seed + j``; results do not depend on
    ``n_threads``. Returns ``(W, b, results, classes)``.
    """
    X = _as_data(data)
    classes, idx = _class_indices(labels)
    k = classes.shape[0]
    Y = _one_hot_signs(idx, k)
    t0 = time.perf_counter()

    def task(j):
        start = time.perf_counter()
        params = dataclasses.replace(config.params,
                                     seed=config.params.seed + j)
        prob = Problem(X, Y[:, j].copy(), config.loss, config.penalty,
                       config.fit_intercept)
        try:
            res, _ = _run(config, prob, params, SILENT)
        except Exception as exc:
            raise OneVsAllError(j, classes[j], exc) from exc
        return j, res, prob, time.perf_counter() - start

    def report(j, res, prob, seconds):
        log("Solver %d has terminated after %d epochs in %g seconds"
            % (j, res.epochs, seconds))
        log("   Primal objective: %g, relative duality gap: %g"
            % (prob.primal(res.W, res.b), res.relative_gap))

    workers = n_threads or _pool_size(k)
    results = [None] * k
    if workers == 1:
        for j in range(k):
            out = task(j)
            report(*out)
            results[j] = out[1]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(task, j) for j in range(k)]
            for f in as_completed(futures):
                out = f.result()
                report(*out)
                results[out[0]] = out[1]
    W = np.concatenate([r.W for r in results], axis=1)
    b = np.concatenate([r.b for r in results])
    log("Time for the one-vs-all strategy")
    log(elapsed_line(time.perf_counter() - t0))
    return W, b, results, classes


def fit(config, data, labels, log=SILENT, n_threads=None):
    """Fit ``config`` on ``(data, labels)`` without copying the data.

    Multiclass tasks with a univariate loss solve the joint problem on
    one-hot ±1 labels; with a columnwise penalty it splits into
    independent one-vs-all problems.
    """
    X = _as_data(data)
    log(matrix_line(X.n, X.p))
    params = config.params
    task = config.task
    classes = None
    if task == "binary-classifier":
        y, classes = _binary_labels(labels, log)
        prob = Problem(X, y, config.loss, config.penalty,
                       config.fit_intercept)
    elif task == "regression":
        y = np.asarray(labels, dtype=np.float64)
        if y.ndim != 1 and not (y.ndim == 2 and y.shape[1] == 1):
            raise ValueError("regression needs a single target column")
        prob = Problem(X, y.ravel(), config.loss, config.penalty,
                       config.fit_intercept)
    elif task == "multivariate-regression":
        Y = np.asarray(labels, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, np.newaxis]
        prob = Problem(X, Y, config.loss, config.penalty,
                       config.fit_intercept, n_outputs=Y.shape[1])
    else:
        classes, idx = _class_indices(labels)
        k = classes.shape[0]
        if k < 2:
            raise ValueError("multiclass labels need at least two classes")
        if loss_code(config.loss) == MULTICLASS:
            prob = Problem(X, idx.astype(np.float64), config.loss,
                           config.penalty, config.fit_intercept, n_outputs=k)
        elif config.penalty.code in (L1L2, L1LINF):
            prob = Problem(X, _one_hot_signs(idx, k), config.loss,
                           config.penalty, config.fit_intercept, n_outputs=k)
        else:
            W, b, results, classes = one_vs_all(config, X, labels, log=log,
                                                n_threads=n_threads)
            solvers = sorted({r.solver for r in results})
            return Model(W.astype(X.dtype), b, config,
                         [r.trace for r in results], classes,
                         solver=",".join(solvers),
                         epochs=max(r.epochs for r in results),
                         converged=all(r.converged for r in results))
    res, _ = _run(config, prob, params, log)
    return Model(res.W.astype(X.dtype), res.b, config, [res.trace], classes,
                 solver=res.solver, epochs=res.epochs,
                 converged=res.converged)


def decision_function(model, X):
    """Scores ``X W + b`` as an (n, k) array, or (n,) for one output."""
    X = _as_data(X)
    if X.p != model.W.shape[0]:
        raise ValueError("model expects p=%d features, data has %d"
                         % (model.W.shape[0], X.p))
    S = X.scores(model.W)
    if model.config.fit_intercept:
        S += model.b
    return S[:, 0] if S.shape[1] == 1 else S


def predict(model, X):
    """Labels for classifiers, raw scores for regression."""
    S = decision_function(model, X)
    task = model.config.task
    if task == "binary-classifier":
        return np.where(S >= 0, model.classes[1], model.classes[0])
    if task == "multiclassifier":
        # argmax returns the first maximum: ties go to the smallest index
        return model.classes[np.argmax(S, axis=1)]
    return S


# ------------------------------------------------------------- persistence

def _b64(a, dtype):
    return base64.b64encode(
        np.ascontiguousarray(a, dtype=dtype).tobytes()).decode("ascii")


def _header(model):
    cfg = model.config
    dt = "f32" if model.W.dtype == np.float32 else "f64"
    classes = None if model.classes is None else model.classes.tolist()
    fields = [
        ("task", cfg.task),
        ("loss", cfg.loss),
        ("penalty", cfg.penalty.kind),
        ("lambda", repr(float(cfg.penalty.lambd))),
        ("lambda2", repr(float(cfg.penalty.lambd2))),
        ("lambda3", repr(float(cfg.penalty.lambd3))),
        ("fit_intercept", str(int(cfg.fit_intercept))),
        ("solver", cfg.solver),
        ("params", json.dumps(dataclasses.asdict(cfg.params), sort_keys=True)),
        ("solver_used", model.solver),
        ("epochs", str(int(model.epochs))),
        ("converged", str(int(model.converged))),
        ("dtype", dt),
        ("shape", "%d %d" % model.W.shape),
        ("classes", json.dumps(classes)),
        ("weights", _b64(model.W, "<f4" if dt == "f32" else "<f8")),
        ("intercept", _b64(model.b, "<f8")),
        ("traces", json.dumps([t.to_records() for t in model.traces])),
    ]
    return fields


def save(model, path):
    """Write ``model``; identical models give identical bytes."""
    lines = [_MAGIC, "version: %d" % FORMAT_VERSION]
    lines += ["%s: %s" % kv for kv in _header(model)]
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(body + "checksum: " + digest + "\nend\n")


def load(path):
    """Read a model written by :func:`save`."""
    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        text = fh.read()
    lines = text.split("\n")
    if not lines or lines[0] != _MAGIC:
        raise ModelFormatError("%s: not a model file" % path)
    if len(lines) < 2 or not lines[1].startswith("version: "):
        raise ModelFormatError("%s: corrupt model file (no version)" % path)
    version = lines[1][len("version: "):]
    if version != str(FORMAT_VERSION):
        raise ModelFormatError("%s: model format version %s, expected %d"
                               % (path, version, FORMAT_VERSION))
    if not text.endswith("\nend\n") or len(lines) < 4:
        raise ModelFormatError("%s: corrupt model file (truncated)" % path)
    check = lines[-3]
    if not check.startswith("checksum: "):
        raise ModelFormatError("%s: corrupt model file (no checksum)" % path)
    body = "\n".join(lines[:-3]) + "\n"
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != check[10:]:
        raise ModelFormatError("%s: corrupt model file (checksum mismatch)"
                               % path)
    kv = {}
    for line in lines[2:-3]:
        key, sep, value = line.partition(": ")
        if not sep:
            raise ModelFormatError("%s: corrupt model file (bad line %r)"
                                   % (path, line[:40]))
        kv[key] = value
    try:
        p, k = (int(v) for v in kv["shape"].split())
        wt = "<f4" if kv["dtype"] == "f32" else "<f8"
        W = np.frombuffer(base64.b64decode(kv["weights"]), dtype=wt)
        b = np.frombuffer(base64.b64decode(kv["intercept"]), dtype="<f8")
        W = W.reshape(p, k).astype(np.float32 if kv["dtype"] == "f32"
                                   else np.float64)
        b = b.reshape(k).copy()
        penalty = PenaltyConfig(kv["penalty"], float(kv["lambda"]),
                                float(kv["lambda2"]), float(kv["lambda3"]))
        params = SolverParams(**json.loads(kv["params"]))
        config = EstimatorConfig(kv["task"], kv["loss"], penalty,
                                 bool(int(kv["fit_intercept"])), kv["solver"],
                                 params)
        classes = json.loads(kv["classes"])
        traces = [Trace.from_records(r) for r in json.loads(kv["traces"])]
        return Model(W, b, config, traces,
                     None if classes is None else np.asarray(classes),
                     solver=kv["solver_used"], epochs=int(kv["epochs"]),
                     converged=bool(int(kv["converged"])),
                     format_version=int(version))
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelFormatError("%s: corrupt model file (%s)" % (path, exc)) \
            from exc


# ---------------------------------------------------------- estimator API

class _Estimator:
    task = None
    default_loss = None

    def __init__(self, loss=None, penalty="l2", fit_intercept=False,
                 verbose=True, n_threads=None):
        self.loss = loss or self.default_loss
        self.penalty = penalty
        self.fit_intercept = fit_intercept
        self.verbose = verbose
        self.n_threads = n_threads
        self.model = None

    def fit(self, X, y, lambd=0.0, lambd2=0.0, lambd3=0.0, solver="auto",
            nepochs=500, tol=1e-3, it0=10, seed=0, **solver_options):
        """Minimize the regularized empirical risk on ``(X, y)``.

        Extra keyword arguments (``memory``, ``kappa``, ``step_size``,
        ``lipschitz_init``, ...) are forwarded to :class:`SolverParams`.
        """
        params = SolverParams(max_epochs=nepochs, tol=tol, it0=it0,
                              seed=seed, **solver_options)
        config = EstimatorConfig(
            self.task, self.loss,
            PenaltyConfig(self.penalty, lambd, lambd2, lambd3),
            self.fit_intercept, solver, params)
        self.model = fit(config, X, y, log=Printer(self.verbose),
                         n_threads=self.n_threads)
        return self

    def _fitted(self):
        if self.model is None:
            raise RuntimeError("call fit first")
        return self.model

    @property
    def W(self):
        return self._fitted().W

    @property
    def b(self):
        return self._fitted().b

    def decision_function(self, X):
        return decision_function(self._fitted(), X)

    def predict(self, X):
        return predict(self._fitted(), X)


class BinaryClassifier(_Estimator):
    """Linear classifier ``sign(w^T x + b)`` on ±1 (or 0/1) labels."""

    task = "binary-classifier"
    default_loss = "logistic"

    def score(self, X, y):
        """Classification accuracy."""
        return float(np.mean(self.predict(X) == np.asarray(y).ravel()))


class Regression(_Estimator):
    """Single-output linear regression."""

    task = "regression"
    default_loss = "square"


class MultiVariateRegression(_Estimator):
    """Linear regression with a (n, k) target matrix."""

    task = "multivariate-regression"
    default_loss = "square"


class MultiClassifier(_Estimator):
    """``argmax_j w_j^T x + b_j`` over the observed classes."""

    task = "multiclassifier"
    default_loss = "multiclass-logistic"

    def score(self, X, y):
        """Classification accuracy."""
        return float(np.mean(self.predict(X) == np.asarray(y).ravel()))
