"""Assembled empirical-risk problem shared by every solver."""
import numpy as np

from . import losses
from .data_matrix import DataMatrix
from .losses import MULTICLASS
from .penalties import PenaltyConfig, penalty_value, split_quadratic


class Problem:
    """``(1/n) sum_i loss(y_i, W^T x_i + b) + psi(W)``.

    Parameters
    ----------
    X : DataMatrix
    Y : ndarray
        Kernel-format labels: (n, k) real or ±1 values for univariate
        losses, or an (n, 1) column of 0-based class indices for
        ``multiclass-logistic``.
    loss : str
    penalty : PenaltyConfig
    fit_intercept : bool
    n_outputs : int
        Number of weight columns k.
    """

    def __init__(self, X, Y, loss, penalty, fit_intercept=False, n_outputs=1):
        self.X = X if isinstance(X, DataMatrix) else DataMatrix(X)
        self.loss_code = losses.loss_code(loss)
        self.loss = loss
        self.penalty = penalty if isinstance(penalty, PenaltyConfig) else \
            PenaltyConfig(*penalty)
        self.fit_intercept = bool(fit_intercept)
        self.k = int(n_outputs)
        Y = np.ascontiguousarray(Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, np.newaxis].copy()
        if Y.shape[0] != self.X.n:
            raise ValueError("got %d labels for n=%d examples"
                             % (Y.shape[0], self.X.n))
        if self.loss_code == MULTICLASS:
            if Y.shape[1] != 1 or np.any(Y < 0) or np.any(Y >= self.k):
                raise ValueError("multiclass labels must be class indices")
        elif Y.shape[1] != self.k:
            raise ValueError("labels have %d columns, expected %d"
                             % (Y.shape[1], self.k))
        self.Y = Y
        self.L = losses.lipschitz_constant(self.loss_code, self.X,
                                           self.fit_intercept)
        self.mu, self.residual = split_quadratic(self.penalty)

    @property
    def n(self):
        return self.X.n

    @property
    def p(self):
        return self.X.p

    def zeros(self):
        """Zero weights and intercept in the solver layout."""
        return np.zeros((self.p, self.k)), np.zeros(self.k)

    def scores(self, W, b):
        S = self.X.scores(W)
        if self.fit_intercept:
            S += b
        return S

    def fit_value(self, S):
        return losses.batch_value(self.loss_code, self.Y, S) / self.n

    def fit_value_grad(self, W, b):
        """Data-fit value and gradient ``(gW, gb)`` at ``(W, b)``."""
        S = self.scores(W, b)
        D = np.empty_like(S)
        val = losses.batch_value_derivative(self.loss_code, self.Y, S, D)
        D /= self.n
        gW = self.X.gradient(D)
        gb = D.sum(axis=0) if self.fit_intercept else np.zeros(self.k)
        return val / self.n, gW, gb

    def primal(self, W, b):
        S = self.scores(W, b)
        return self.fit_value(S) + penalty_value(self.penalty, W)
