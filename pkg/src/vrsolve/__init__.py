"""Regularized linear models trained by variance-reduced solvers.

The objective is ``(1/n) sum_i loss(y_i, W^T x_i + b) + psi(W)``; every
run stops on a certified relative duality gap.
"""
from .data_matrix import (DataMatrix, LibsvmFormatError, load_binary,
                          load_libsvm, preprocess, save_binary, synthesize)
from .duality import (GapReport, NumericalFailure, Trace, duality_gap,
                      should_stop)
from .estimators import (BinaryClassifier, EstimatorConfig, Model,
                         ModelFormatError, MultiClassifier,
                         MultiVariateRegression, OneVsAllError, Regression,
                         auto_select, decision_function, fit, load, one_vs_all,
                         predict, save)
from .losses import (data_fit, lipschitz_constant, loss_conjugate,
                     loss_derivative, loss_value)
from .penalties import (PenaltyConfig, conjugate_certificate, penalty_value,
                        prox, strong_convexity)
from .problem import Problem
from .solvers import SOLVERS, FitResult, SolverParams, solve

__version__ = "0.1.0"

__all__ = [
    "DataMatrix", "LibsvmFormatError", "load_libsvm", "load_binary",
    "save_binary", "preprocess", "synthesize",
    "GapReport", "NumericalFailure", "Trace", "duality_gap", "should_stop",
    "BinaryClassifier", "Regression", "MultiVariateRegression",
    "MultiClassifier", "EstimatorConfig", "Model", "ModelFormatError",
    "OneVsAllError", "auto_select", "fit", "one_vs_all", "predict",
    "decision_function", "save", "load",
    "data_fit", "lipschitz_constant", "loss_value", "loss_derivative",
    "loss_conjugate",
    "PenaltyConfig", "penalty_value", "prox", "conjugate_certificate",
    "strong_convexity",
    "Problem", "SOLVERS", "SolverParams", "FitResult", "solve",
]
