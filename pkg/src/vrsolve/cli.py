"""Command-line front end: ``train``, ``predict`` and ``benchmark``.

Exit codes: 0 on success (a converged fit), 2 when ``train`` exhausts its
epoch budget before reaching ``--tol``, 1 on any error.
"""
import argparse
import csv
import os
import sys
import time

import numpy as np

from .data_matrix import load_binary, load_libsvm, preprocess
from .estimators import (EstimatorConfig, ModelFormatError, fit, load, predict,
                         save)
from .logs import SILENT, Printer
from .losses import LOSSES
from .penalties import PENALTIES, PenaltyConfig
from .solvers import SOLVERS, SolverParams

EXIT_OK, EXIT_ERROR, EXIT_BUDGET = 0, 1, 2
BENCH_TOLS = (0.1, 0.01, 0.001, 0.0001)
GRID_SIZE = 16

_LOSS_NAMES = tuple(LOSSES) + ("sq-hinge",)
_SOLVER_NAMES = SOLVERS + ("auto",)


class CliError(Exception):
    """Bad flags or data; reported on stderr with exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 means "budget exhausted" here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, "%s: error: %s\n" % (self.prog, message))


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="dataset path")
    p.add_argument("--format", choices=("libsvm", "bin"), default="libsvm")
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    p.add_argument("--normalize", action="store_true",
                   help="scale every row to unit Euclidean norm")
    p.add_argument("--center", action="store_true",
                   help="center every row (dense data only)")


def _add_model_flags(p):
    p.add_argument("--task", default="infer",
                   choices=("infer", "binary-classifier", "regression",
                            "multivariate-regression", "multiclassifier"),
                   help="default: from the loss and the labels")
    p.add_argument("--loss", choices=_LOSS_NAMES, default="logistic")
    p.add_argument("--penalty", choices=tuple(PENALTIES), default="l2")
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--lambda3", type=float, default=0.0)
    p.add_argument("--intercept", action="store_true")
    p.add_argument("--it0", type=int, default=10,
                   help="epochs between duality-gap evaluations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quiet", action="store_true")


def build_parser():
    parser = _Parser(prog="vrsolve",
                     description="Train and evaluate regularized linear "
                                 "models with certified stopping.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    t = sub.add_parser("train", help="fit a model and save it")
    _add_data_flags(t)
    _add_model_flags(t)
    t.add_argument("--lambda", dest="lambd", type=float, required=True)
    t.add_argument("--solver", choices=_SOLVER_NAMES, default="auto")
    t.add_argument("--tol", type=float, default=1e-3)
    t.add_argument("--nepochs", type=int, default=500)
    t.add_argument("--out", required=True, help="model output path")
    t.add_argument("--trace", help="optional CSV trace output path")

    p = sub.add_parser("predict", help="apply a saved model")
    _add_data_flags(p)
    p.add_argument("--model", required=True)
    p.add_argument("--labels", help="text file of true labels, one per line; "
                                    "'data' uses the labels of --data")
    p.add_argument("--out", help="write predictions here (one per line)")

    b = sub.add_parser("benchmark", help="run solvers over the tolerance grid")
    _add_data_flags(b)
    _add_model_flags(b)
    lam = b.add_mutually_exclusive_group(required=True)
    lam.add_argument("--lambda", dest="lambd", type=float)
    lam.add_argument("--grid-select", action="store_true",
                     help="pick lambda in 2^-i/n, i=1..16, on an 80/20 split")
    b.add_argument("--solvers", required=True,
                   help="comma-separated solver names")
    b.add_argument("--nepochs", type=int, default=500)
    b.add_argument("--outdir", default="benchmark")
    return parser


# ------------------------------------------------------------------ helpers

def _load(args, n_features=None):
    try:
        if args.format == "libsvm":
            X, y = load_libsvm(args.data, args.precision, n_features)
        else:
            X, y = load_binary(args.data)
            if X.precision != args.precision:
                raise CliError("%s stores %s values, --precision is %s"
                               % (args.data, X.precision, args.precision))
    except OSError as exc:
        raise CliError("cannot read %s: %s" % (args.data, exc.strerror))
    except ValueError as exc:
        raise CliError("%s: %s" % (args.data, exc))
    if args.center or args.normalize:
        try:
            preprocess(X, centering=args.center, normalize=args.normalize)
        except NotImplementedError as exc:
            raise CliError(str(exc))
    return X, y


def infer_task(loss, y):
    """Task implied by the loss and the label values."""
    y = np.asarray(y)
    if loss == "multiclass-logistic":
        return "multiclassifier"
    if y.ndim == 2 and y.shape[1] > 1:
        return "multivariate-regression"
    if loss == "square" and np.unique(y).size > 2:
        return "regression"
    if np.unique(y).size <= 2:
        return "binary-classifier"
    return "multiclassifier"


def _make_config(args, y, lambd, tol, nepochs, solver):
    loss = "sqhinge" if args.loss == "sq-hinge" else args.loss
    task = infer_task(loss, y) if args.task == "infer" else args.task
    penalty = PenaltyConfig(args.penalty, lambd, args.lambda2, args.lambda3)
    params = SolverParams(max_epochs=nepochs, tol=tol, it0=args.it0,
                          seed=args.seed)
    return EstimatorConfig(task, loss, penalty, args.intercept, solver, params)


def evaluate(model, X, y):
    """``('accuracy', value)`` for classifiers, ``('mse', value)`` otherwise."""
    pred = predict(model, X)
    y = np.asarray(y)
    if model.config.task in ("binary-classifier", "multiclassifier"):
        return "accuracy", float(np.mean(pred == y.ravel()))
    return "mse", float(np.mean((pred.reshape(y.shape) - y) ** 2))


# ----------------------------------------------------------------- commands

def cmd_train(args):
    X, y = _load(args)
    config = _make_config(args, y, args.lambd, args.tol, args.nepochs,
                          args.solver)
    log = SILENT if args.quiet else Printer()
    model = fit(config, X, y, log=log)
    save(model, args.out)
    if args.trace:
        model.traces[0].write_csv(args.trace)
    return EXIT_OK if model.converged else EXIT_BUDGET


def cmd_predict(args):
    try:
        model = load(args.model)
    except OSError as exc:
        raise CliError("cannot read %s: %s" % (args.model, exc.strerror))
    except ModelFormatError as exc:
        raise CliError(str(exc))
    p = model.W.shape[0]
    n_features = p if args.format == "libsvm" else None
    X, y = _load(args, n_features)
    if X.p != p:
        raise CliError("model expects p=%d features, data has p=%d" % (p, X.p))
    pred = predict(model, X)
    if args.out:
        np.savetxt(args.out, pred, fmt="%.17g")
    if args.labels:
        truth = y if args.labels == "data" else np.loadtxt(args.labels)
        if truth.shape[0] != X.n:
            raise CliError("got %d labels for %d examples"
                           % (truth.shape[0], X.n))
        name, value = evaluate(model, X, truth)
        print("%s: %g" % (name, value))
    elif not args.out:
        np.savetxt(sys.stdout, pred, fmt="%.17g")
    return EXIT_OK


def lambda_grid(n):
    """Candidate regularization weights ``2^-i / n``, i = 1..16."""
    return [2.0 ** -i / n for i in range(1, GRID_SIZE + 1)]


def grid_select(args, X, y, log=SILENT):
    """Best lambda on a seeded 80/20 split; returns ``(lambda, scores)``."""
    rng = np.random.default_rng(args.seed)
    perm = rng.permutation(X.n)
    cut = int(round(0.8 * X.n))
    tr, va = np.sort(perm[:cut]), np.sort(perm[cut:])
    Xtr, Xva = X.take_rows(tr), X.take_rows(va)
    scores = []
    for lam in lambda_grid(X.n):
        config = _make_config(args, y, lam, 1e-3, args.nepochs, "auto")
        model = fit(config, Xtr, y[tr])
        name, value = evaluate(model, Xva, y[va])
        scores.append((lam, name, value))
        log("lambda %g: validation %s %g" % (lam, name, value))
    if scores[0][1] == "accuracy":
        best = max(scores, key=lambda s: s[2])
    else:
        best = min(scores, key=lambda s: s[2])
    return best[0], scores


_SUMMARY = ("solver", "tol", "lambda", "epochs", "seconds", "primal",
            "relative_gap", "converged", "trace", "error")


def cmd_benchmark(args):
    solvers = [s.strip() for s in args.solvers.split(",") if s.strip()]
    bad = [s for s in solvers if s not in _SOLVER_NAMES]
    if not solvers or bad:
        raise CliError("unknown solver(s) %s; valid names: %s"
                       % (", ".join(bad), ", ".join(_SOLVER_NAMES)))
    X, y = _load(args)
    log = SILENT if args.quiet else Printer()
    if args.grid_select:
        lambd, _ = grid_select(args, X, y, log)
        log("selected lambda: %g" % lambd)
    else:
        lambd = args.lambd
    os.makedirs(args.outdir, exist_ok=True)
    rows, failed = [], False
    for solver in solvers:
        for tol in BENCH_TOLS:
            trace_path = os.path.join(args.outdir,
                                      "%s_tol%g.csv" % (solver, tol))
            row = dict(solver=solver, tol=tol, **{"lambda": lambd},
                       trace=trace_path, error="")
            config = _make_config(args, y, lambd, tol, args.nepochs, solver)
            t0 = time.perf_counter()
            try:
                model = fit(config, X, y)
            except Exception as exc:  # recorded, run continues
                failed = True
                row.update(epochs="", seconds=time.perf_counter() - t0,
                           primal="", relative_gap="", converged=0,
                           trace="", error="%s: %s" % (type(exc).__name__, exc))
                rows.append(row)
                log("%s tol=%g failed: %s" % (solver, tol, exc))
                continue
            seconds = time.perf_counter() - t0
            trace = model.traces[0]
            trace.write_csv(trace_path)
            last = trace.last
            row.update(epochs=model.epochs, seconds=seconds,
                       primal=last.primal, relative_gap=model.relative_gap,
                       converged=int(model.converged))
            rows.append(row)
            log("%s tol=%g: %d epochs, %g seconds, relative gap %g"
                % (solver, tol, model.epochs, seconds, model.relative_gap))
    with open(os.path.join(args.outdir, "summary.csv"), "w",
              newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_SUMMARY)
        w.writeheader()
        w.writerows(rows)
    return EXIT_ERROR if failed else EXIT_OK


_COMMANDS = {"train": cmd_train, "predict": cmd_predict,
             "benchmark": cmd_benchmark}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (CliError, ValueError, NotImplementedError, RuntimeError) as exc:
        # RuntimeError covers diverging solvers and failed one-vs-all classes
        print("vrsolve: error: %s" % exc, file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
