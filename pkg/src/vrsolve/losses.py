"""Smooth losses: values, derivatives, Fenchel conjugates, Lipschitz constants.

Every loss is a function of a label and a score. Univariate kinds act
elementwise on an (n, k) score matrix against (n, k) labels (k = 1 for
plain binary/regression problems, k > 1 for one-hot expanded or
multi-output problems). ``multiclass-logistic`` acts row-wise on (n, k)
scores with one class index per row.

Class indices are 1-based in the public functions and 0-based in the
compiled kernels.
"""
import math

import numpy as np
from numba import njit

__all__ = [
    "LOSSES",
    "loss_code",
    "loss_value",
    "loss_derivative",
    "loss_conjugate",
    "data_fit",
    "lipschitz_constant",
]

SQUARE, LOGISTIC, SQHINGE, SAFE_LOGISTIC, MULTICLASS = range(5)

LOSSES = {
    "square": SQUARE,
    "logistic": LOGISTIC,
    "sqhinge": SQHINGE,
    "safe-logistic": SAFE_LOGISTIC,
    "multiclass-logistic": MULTICLASS,
}
_ALIASES = {"sq-hinge": "sqhinge", "squared-hinge": "sqhinge",
            "multinomial": "multiclass-logistic"}

BANNERS = {
    SQUARE: "Square Loss is used",
    LOGISTIC: "Logistic Loss is used",
    SQHINGE: "Squared Hinge Loss is used",
    SAFE_LOGISTIC: "Safe Logistic Loss is used",
    MULTICLASS: "Multiclass logistic Loss is used",
}

# curvature bound of the loss in its score argument
_CURVATURE = {SQUARE: 1.0, LOGISTIC: 0.25, SQHINGE: 1.0, SAFE_LOGISTIC: 1.0,
              MULTICLASS: 0.25}

# slack accepted on conjugate domain boundaries
_DOMAIN_TOL = 1e-10


def loss_code(kind):
    """Integer code of a loss name; raises ValueError on unknown names."""
    if isinstance(kind, (int, np.integer)):
        return int(kind)
    name = _ALIASES.get(kind, kind)
    try:
        return LOSSES[name]
    except KeyError:
        raise ValueError("unknown loss %r; valid names: %s"
                         % (kind, ", ".join(LOSSES))) from None


@njit(cache=True, nogil=True)
def _logistic(z):
    # log(1 + exp(-z)), stable on both tails
    if z > 0:
        return math.log1p(math.exp(-z))
    return -z + math.log1p(math.exp(z))


@njit(cache=True, nogil=True)
def _sigmoid_neg(z):
    # 1 / (1 + exp(z))
    if z > 0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


@njit(cache=True, nogil=True)
def scalar_value(code, y, s):
    if code == SQUARE:
        r = y - s
        return 0.5 * r * r
    z = y * s
    if code == LOGISTIC:
        return _logistic(z)
    if code == SQHINGE:
        m = 1.0 - z
        return 0.5 * m * m if m > 0 else 0.0
    # safe-logistic
    if z <= 1.0:
        return math.exp(z - 1.0) - z
    return 0.0


@njit(cache=True, nogil=True)
def scalar_derivative(code, y, s):
    if code == SQUARE:
        return s - y
    z = y * s
    if code == LOGISTIC:
        return -y * _sigmoid_neg(z)
    if code == SQHINGE:
        m = 1.0 - z
        return -y * m if m > 0 else 0.0
    if z <= 1.0:
        return y * (math.exp(z - 1.0) - 1.0)
    return 0.0


@njit(cache=True, nogil=True)
def scalar_curvature(code, y, s):
    if code == SQUARE:
        return 1.0
    z = y * s
    if code == LOGISTIC:
        q = _sigmoid_neg(z)
        return q * (1.0 - q)
    if code == SQHINGE:
        return 1.0 if z < 1.0 else 0.0
    if z <= 1.0:
        return math.exp(z - 1.0)
    return 0.0


@njit(cache=True, nogil=True)
def _xlogx(x):
    if x <= 0.0:
        return 0.0
    return x * math.log(x)


@njit(cache=True, nogil=True)
def scalar_conjugate(code, y, u):
    if code == SQUARE:
        return 0.5 * u * u + u * y
    t = u * y
    if code == LOGISTIC:
        if t > _DOMAIN_TOL or t < -1.0 - _DOMAIN_TOL:
            return np.inf
        t = min(0.0, max(-1.0, t))
        return _xlogx(-t) + _xlogx(1.0 + t)
    if code == SQHINGE:
        if t > _DOMAIN_TOL:
            return np.inf
        t = min(0.0, t)
        return t + 0.5 * t * t
    if t > _DOMAIN_TOL or t < -1.0 - _DOMAIN_TOL:
        return np.inf
    t = min(0.0, max(-1.0, t))
    return _xlogx(1.0 + t)


@njit(cache=True, nogil=True)
def row_value(code, Y, S, i):
    """Loss of example ``i`` summed over its k score columns."""
    k = S.shape[1]
    if code == MULTICLASS:
        c = int(Y[i, 0])
        m = S[i, 0]
        for j in range(1, k):
            if S[i, j] > m:
                m = S[i, j]
        acc = 0.0
        for j in range(k):
            acc += math.exp(S[i, j] - m)
        return m + math.log(acc) - S[i, c]
    acc = 0.0
    for j in range(k):
        acc += scalar_value(code, Y[i, j], S[i, j])
    return acc


@njit(cache=True, nogil=True)
def row_derivative(code, yrow, s, out):
    """Derivative of one example's loss w.r.t. its k scores, into ``out``."""
    k = s.shape[0]
    if code == MULTICLASS:
        c = int(yrow[0])
        m = s[0]
        for j in range(1, k):
            if s[j] > m:
                m = s[j]
        tot = 0.0
        for j in range(k):
            out[j] = math.exp(s[j] - m)
            tot += out[j]
        for j in range(k):
            out[j] /= tot
        out[c] -= 1.0
        return
    for j in range(k):
        out[j] = scalar_derivative(code, yrow[j], s[j])


@njit(cache=True, nogil=True)
def row_conjugate(code, yrow, u):
    k = u.shape[0]
    if code == MULTICLASS:
        c = int(yrow[0])
        tot = 0.0
        acc = 0.0
        for j in range(k):
            v = u[j] + (1.0 if j == c else 0.0)
            if v < -_DOMAIN_TOL:
                return np.inf
            tot += v
            acc += _xlogx(v)
        if abs(tot - 1.0) > 1e-8:
            return np.inf
        return acc
    acc = 0.0
    for j in range(k):
        acc += scalar_conjugate(code, yrow[j], u[j])
    return acc


@njit(cache=True, nogil=True)
def batch_value_derivative(code, Y, S, D):
    """Sum of losses over all rows; derivatives written into ``D``."""
    n = S.shape[0]
    total = 0.0
    for i in range(n):
        total += row_value(code, Y, S, i)
        row_derivative(code, Y[i], S[i], D[i])
    return total


@njit(cache=True, nogil=True)
def batch_value(code, Y, S):
    total = 0.0
    for i in range(S.shape[0]):
        total += row_value(code, Y, S, i)
    return total


@njit(cache=True, nogil=True)
def batch_conjugate(code, Y, U):
    total = 0.0
    for i in range(U.shape[0]):
        total += row_conjugate(code, Y[i], U[i])
        if total == np.inf:
            return total
    return total


# ---------------------------------------------------------------- public API

def _as_label_row(code, y, k):
    if code == MULTICLASS:
        c = int(y)
        if c < 1 or c > k:
            raise ValueError("class index %r outside 1..%d" % (y, k))
        return np.array([c - 1.0])
    yrow = np.broadcast_to(np.asarray(y, dtype=np.float64), (k,)).copy()
    if code in (LOGISTIC, SQHINGE, SAFE_LOGISTIC) and not np.all(
            np.abs(yrow) == 1.0):
        raise ValueError("%s loss needs labels in {-1, +1}, got %r"
                         % (_name(code), y))
    return yrow


def _name(code):
    return [k for k, v in LOSSES.items() if v == code][0]


def loss_value(kind, y, s):
    """Loss of one example: label ``y`` (±1, real, or class index 1..k)."""
    code = loss_code(kind)
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    yrow = _as_label_row(code, y, s.shape[0])
    return float(row_value(code, yrow[np.newaxis, :], s[np.newaxis, :], 0))


def loss_derivative(kind, y, s):
    """Derivative w.r.t. the score; a float, or a vector for multiclass."""
    code = loss_code(kind)
    scalar = np.ndim(s) == 0
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    yrow = _as_label_row(code, y, s.shape[0])
    out = np.empty_like(s)
    row_derivative(code, yrow, s, out)
    return float(out[0]) if scalar and code != MULTICLASS else out


def loss_conjugate(kind, y, u):
    """Fenchel conjugate in the score argument; ``inf`` off its domain."""
    code = loss_code(kind)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    yrow = _as_label_row(code, y, u.shape[0])
    return float(row_conjugate(code, yrow, u))


def data_fit(kind, data, labels, w, b=None):
    """Average loss over the dataset and its gradient.

    Parameters
    ----------
    data : DataMatrix
    labels : ndarray
        (n,) labels, or (n, k) for multi-output univariate losses. For
        ``multiclass-logistic`` a vector of class indices in 1..k.
    w : ndarray of shape (p,) or (p, k)
    b : float or ndarray of shape (k,), optional

    Returns
    -------
    value : float
    grad : tuple ``(grad_w, grad_b)``; ``grad_b`` is None without ``b``.
    """
    code = loss_code(kind)
    w = np.asarray(w, dtype=np.float64)
    vector = w.ndim == 1
    W = w[:, np.newaxis] if vector else w
    S = data.scores(W, None if b is None else np.atleast_1d(b))
    Y = _label_matrix(code, labels, W.shape[1])
    if Y.shape[0] != data.n:
        raise ValueError("got %d labels for n=%d examples"
                         % (Y.shape[0], data.n))
    D = np.empty_like(S)
    value = batch_value_derivative(code, Y, S, D) / data.n
    D /= data.n
    gw = data.gradient(D)
    gb = None if b is None else D.sum(axis=0)
    if vector:
        gw = gw[:, 0]
        if gb is not None:
            gb = float(gb[0])
    return value, (gw, gb)


def _label_matrix(code, labels, k):
    labels = np.asarray(labels, dtype=np.float64)
    if code == MULTICLASS:
        return (labels.reshape(-1) - 1.0)[:, np.newaxis].copy()
    if labels.ndim == 1:
        labels = labels[:, np.newaxis]
    if labels.shape[1] != k:
        raise ValueError("labels have %d columns, weights have %d"
                         % (labels.shape[1], k))
    return np.ascontiguousarray(labels)


def lipschitz_constant(kind, data, intercept=False):
    """Largest per-example gradient Lipschitz constant.

    ``c * max_i ||x_i||^2`` with c = 1/4 for the logistic kinds and 1
    otherwise; with an intercept the implicit unit feature adds 1 to each
    squared norm.
    """
    code = loss_code(kind)
    if data.n == 0:
        raise ValueError("empty dataset")
    norms = data.row_norms_sq()
    if intercept:
        norms = norms + 1.0
    return _CURVATURE[code] * float(norms.max())
