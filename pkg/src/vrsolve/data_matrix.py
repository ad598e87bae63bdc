"""Feature-matrix storage, in-place preprocessing and file ingestion.

A :class:`DataMatrix` wraps either a C-contiguous dense array or a CSR
matrix (scipy) without copying the caller's buffers. Training code only
reads from it; :func:`preprocess` is the single mutating entry point.
"""
import hashlib
import struct

import numpy as np
from scipy import sparse

__all__ = [
    "DataMatrix",
    "LibsvmFormatError",
    "load_libsvm",
    "preprocess",
    "synthesize",
    "save_binary",
    "load_binary",
]

_FLOAT_TYPES = (np.float32, np.float64)


class LibsvmFormatError(ValueError):
    """Raised on malformed libsvm input; carries the 1-based line number."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = "line %d: %s" % (lineno, message)
        super().__init__(message)


class DataMatrix:
    """Read-only view over a dense row-major or CSR feature matrix.

    Parameters
    ----------
    X : ndarray of shape (n, p) or scipy.sparse.csr_matrix
        Features in float32 or float64. Dense input must be C-contiguous
        and sparse input must be CSR with sorted, duplicate-free indices;
        anything else is rejected rather than silently copied.
    """

    def __init__(self, X):
        if isinstance(X, DataMatrix):
            X = X.raw
        if sparse.issparse(X):
            if X.format != "csr":
                raise TypeError(
                    "sparse input must be CSR (got %s); convert it once with "
                    "X.tocsr() before training" % X.format)
            if X.dtype.type not in _FLOAT_TYPES:
                raise TypeError("sparse values must be float32 or float64")
            _check_csr(X.data, X.indices, X.indptr, X.shape)
            self.raw = X
            self.is_sparse = True
        else:
            X = np.asarray(X)
            if X.ndim != 2:
                raise ValueError("feature matrix must be 2-D, got %d-D" % X.ndim)
            if X.dtype.type not in _FLOAT_TYPES:
                raise TypeError("dense values must be float32 or float64, "
                                "got %s" % X.dtype)
            if not X.flags.c_contiguous:
                raise TypeError("dense input must be C-contiguous (row-major)")
            if not np.all(np.isfinite(X)):
                raise ValueError("feature matrix contains NaN or Inf")
            self.raw = X
            self.is_sparse = False
        self.n, self.p = self.raw.shape
        self.dtype = self.raw.dtype

    @property
    def shape(self):
        return self.n, self.p

    @property
    def nnz(self):
        if self.is_sparse:
            return int(self.raw.nnz)
        return self.n * self.p

    @property
    def precision(self):
        return "f32" if self.dtype == np.float32 else "f64"

    def __repr__(self):
        layout = "csr" if self.is_sparse else "dense"
        return "DataMatrix(n=%d, p=%d, layout=%s, precision=%s)" % (
            self.n, self.p, layout, self.precision)

    def kernel_args(self):
        """Arrays in the layout expected by the compiled kernels.

        Returns ``(is_sparse, dense, data, indices, indptr)``; the unused
        side is filled with empty placeholders of matching dtype.
        """
        if self.is_sparse:
            X = self.raw
            dense = np.empty((0, 0), dtype=self.dtype)
            return True, dense, X.data, X.indices, X.indptr
        empty_idx = np.empty(0, dtype=np.int32)
        return (False, self.raw, np.empty(0, dtype=self.dtype),
                empty_idx, empty_idx)

    def row_norms_sq(self):
        """Squared Euclidean norm of every row, as float64."""
        if self.is_sparse:
            X = self.raw
            sq = X.data.astype(np.float64) ** 2
            # np.add.reduceat mishandles empty rows, bincount does not
            rows = np.repeat(np.arange(self.n), np.diff(X.indptr))
            return np.bincount(rows, weights=sq, minlength=self.n)
        return np.einsum("ij,ij->i", self.raw, self.raw, dtype=np.float64)

    def scores(self, W, b=None):
        """Compute ``X @ W + b`` without appending a column of ones.

        ``W`` may be a vector of length p (scores of shape (n,)) or a
        (p, k) matrix (scores of shape (n, k)). Products run in the data
        precision and are returned as float64.
        """
        W = np.asarray(W)
        if W.shape[0] != self.p:
            raise ValueError("weights have %d rows, data has p=%d"
                             % (W.shape[0], self.p))
        Wc = W.astype(self.dtype, copy=False)
        S = np.asarray(self.raw @ Wc, dtype=np.float64)
        if b is not None:
            b = np.asarray(b, dtype=np.float64)
            if b.ndim and b.shape[0] != (S.shape[1] if S.ndim == 2 else 1):
                raise ValueError("intercept shape %s does not match weights"
                                 % (b.shape,))
            S = S + b
        return S

    def accumulate_gradient(self, coeffs, out):
        """In place ``out += X.T @ coeffs``.

        ``coeffs`` has shape (n,) or (n, k) and ``out`` the matching (p,)
        or (p, k) shape.
        """
        coeffs = np.asarray(coeffs)
        if coeffs.shape[0] != self.n:
            raise ValueError("coefficients have length %d, data has n=%d"
                             % (coeffs.shape[0], self.n))
        if out.shape[0] != self.p or out.shape[1:] != coeffs.shape[1:]:
            raise ValueError("output shape %s incompatible with coefficients "
                             "%s" % (out.shape, coeffs.shape))
        c = coeffs.astype(self.dtype, copy=False)
        out += np.asarray(self.raw.T @ c, dtype=np.float64)
        return out

    def gradient(self, coeffs):
        """Return ``X.T @ coeffs`` as a fresh float64 array."""
        coeffs = np.asarray(coeffs)
        out = np.zeros((self.p,) + coeffs.shape[1:])
        return self.accumulate_gradient(coeffs, out)

    def checksum(self):
        """SHA-256 over the stored buffers; used to prove no mutation."""
        h = hashlib.sha256()
        if self.is_sparse:
            for arr in (self.raw.data, self.raw.indices, self.raw.indptr):
                h.update(np.ascontiguousarray(arr).tobytes())
        else:
            h.update(self.raw.tobytes())
        return h.hexdigest()

    def take_rows(self, rows):
        """New DataMatrix holding a copy of the selected rows (for splits)."""
        rows = np.asarray(rows)
        if self.is_sparse:
            sub = self.raw[rows]
            sub.sort_indices()
            return DataMatrix(sub)
        return DataMatrix(np.ascontiguousarray(self.raw[rows]))


def _check_csr(data, indices, indptr, shape):
    n, p = shape
    if indptr.shape[0] != n + 1 or indptr[0] != 0 or indptr[-1] != data.shape[0]:
        raise ValueError("malformed CSR indptr")
    if np.any(np.diff(indptr) < 0):
        raise ValueError("CSR indptr must be nondecreasing")
    if indices.size:
        if indices.min() < 0 or indices.max() >= p:
            raise ValueError("CSR column index out of range")
        d = np.diff(indices.astype(np.int64))
        # Differences that cross a row boundary are allowed to be negative.
        row_start = np.zeros(indices.size, dtype=bool)
        starts = indptr[:-1][np.diff(indptr) > 0]
        row_start[starts] = True
        if np.any((d <= 0) & ~row_start[1:]):
            raise ValueError("CSR column indices must be strictly increasing "
                             "within each row")
    if not np.all(np.isfinite(data)):
        raise ValueError("feature matrix contains NaN or Inf")


def load_libsvm(path, precision="f64", n_features=None):
    """Read a libsvm/svmlight text file into a CSR :class:`DataMatrix`.

    Returns ``(X, y)`` where ``y`` holds the raw real-valued labels; the
    caller decides whether they are binary, class indices or targets.
    ``p`` is the largest feature index, or ``n_features`` if given (a
    file using a larger index is then an error).
    """
    dtype = _dtype_of(precision)
    labels, data, indices, indptr = [], [], [], [0]
    p = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise LibsvmFormatError("bad label %r" % tokens[0], lineno)
            last = 0
            for tok in tokens[1:]:
                idx, sep, val = tok.partition(":")
                if not sep:
                    raise LibsvmFormatError("expected idx:val, got %r" % tok,
                                            lineno)
                try:
                    j = int(idx)
                    v = float(val)
                except ValueError:
                    raise LibsvmFormatError("bad entry %r" % tok, lineno)
                if j < 1:
                    raise LibsvmFormatError(
                        "feature indices are 1-based, got %d" % j, lineno)
                if j <= last:
                    raise LibsvmFormatError(
                        "feature indices must be strictly ascending", lineno)
                if not np.isfinite(v):
                    raise LibsvmFormatError("non-finite value %r" % tok, lineno)
                last = j
                indices.append(j - 1)
                data.append(v)
            p = max(p, last)
            indptr.append(len(indices))
    if not labels:
        raise ValueError("empty dataset: %s" % path)
    if n_features is not None:
        if p > n_features:
            raise ValueError("%s uses feature %d but p=%d was requested"
                             % (path, p, n_features))
        p = n_features
    n = len(labels)
    X = sparse.csr_matrix(
        (np.asarray(data, dtype=dtype), np.asarray(indices, dtype=np.int32),
         np.asarray(indptr, dtype=np.int64 if len(indices) > 2**31 - 1
                    else np.int32)),
        shape=(n, p))
    return DataMatrix(X), np.asarray(labels, dtype=np.float64)


def _dtype_of(precision):
    if precision in ("f32", "float32", np.float32):
        return np.float32
    if precision in ("f64", "float64", np.float64):
        return np.float64
    raise ValueError("precision must be f32 or f64, got %r" % (precision,))


def preprocess(X, centering=False, normalize=True, columns=False):
    """Center and/or normalize rows (or columns) of ``X`` in place.

    Works on a :class:`DataMatrix`, a dense ndarray or a CSR matrix. Rows
    (columns) with zero norm are left untouched by normalization.
    Centering a sparse matrix would densify it and is refused.
    """
    raw = X.raw if isinstance(X, DataMatrix) else X
    if sparse.issparse(raw):
        if centering:
            raise NotImplementedError(
                "centering a sparse matrix would densify it; not supported")
        if not normalize:
            return X
        if raw.format != "csr":
            raise TypeError("sparse input must be CSR")
        if columns:
            norms = np.sqrt(np.bincount(raw.indices, weights=raw.data ** 2,
                                        minlength=raw.shape[1]))
            scale = np.ones_like(norms)
            scale[norms > 0] = 1.0 / norms[norms > 0]
            raw.data *= scale[raw.indices].astype(raw.dtype)
        else:
            for i in range(raw.shape[0]):
                lo, hi = raw.indptr[i], raw.indptr[i + 1]
                nrm = np.sqrt(np.dot(raw.data[lo:hi], raw.data[lo:hi]))
                if nrm > 0:
                    raw.data[lo:hi] /= nrm
        return X
    if not isinstance(raw, np.ndarray) or raw.ndim != 2:
        raise TypeError("preprocess expects a 2-D array or CSR matrix")
    axis = 0 if columns else 1
    if centering:
        raw -= raw.mean(axis=axis, keepdims=True)
    if normalize:
        norms = np.sqrt(np.einsum("ij,ij->j" if columns else "ij,ij->i",
                                  raw, raw))
        norms[norms == 0] = 1.0
        if columns:
            raw /= norms[np.newaxis, :]
        else:
            raw /= norms[:, np.newaxis]
    return X


def synthesize(n, p, density=1.0, cond=1.0, seed=0, task="binary", k=3,
               noise=0.05, return_coef=False):
    """Deterministic synthetic data from a planted linear model.

    Features are Gaussian with column scales decaying geometrically from 1
    to ``1/sqrt(cond)``. ``density < 1`` yields a CSR matrix with roughly
    that fraction of stored entries.

    task : {'binary', 'regression', 'multiclass', 'multivariate'}
        Binary labels are ±1 with a fraction ``noise`` flipped, regression
        targets get Gaussian noise of std ``noise``, multiclass labels are
        in 1..k.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    if not 0 < density <= 1:
        raise ValueError("density must be in (0, 1], got %r" % (density,))
    if cond < 1:
        raise ValueError("cond must be >= 1")
    rng = np.random.default_rng(seed)
    scales = np.geomspace(1.0, 1.0 / np.sqrt(cond), p)
    if density >= 1:
        X = rng.standard_normal((n, p)) * scales
        dm = DataMatrix(np.ascontiguousarray(X))
    else:
        mask = rng.random((n, p)) < density
        # keep at least one entry per row so every example carries signal
        empty = ~mask.any(axis=1)
        mask[empty, rng.integers(0, p, size=empty.sum())] = True
        vals = rng.standard_normal((n, p)) * scales
        X = sparse.csr_matrix(np.where(mask, vals, 0.0))
        X.sort_indices()
        dm = DataMatrix(X)
    n_out = k if task in ("multiclass", "multivariate") else 1
    coef = rng.standard_normal((p, n_out)) / np.sqrt(p * density) * 3.0
    S = dm.scores(coef)
    if task == "binary":
        y = np.where(S[:, 0] >= 0, 1.0, -1.0)
        flip = rng.random(n) < noise
        y[flip] = -y[flip]
        coef = coef[:, 0]
    elif task == "regression":
        y = S[:, 0] + noise * rng.standard_normal(n)
        coef = coef[:, 0]
    elif task == "multiclass":
        y = np.argmax(S + noise * rng.standard_normal(S.shape), axis=1) + 1.0
    elif task == "multivariate":
        y = S + noise * rng.standard_normal(S.shape)
    else:
        raise ValueError("unknown task %r" % (task,))
    if return_coef:
        return dm, y, coef
    return dm, y


_MAGIC = b"VRSD"
_BIN_VERSION = 1
_HEADER = struct.Struct("<4sIQQBBBxQ")


def save_binary(path, X, y):
    """Raw little-endian dump of a DataMatrix and its labels.

    Header: magic ``VRSD``, version (u32), n (u64), p (u64), layout (u8,
    0 dense / 1 csr), precision (u8, 4 or 8 bytes), label columns (u8),
    pad, nnz (u64). Then the buffers (dense values, or data / int64
    indices / int64 indptr) followed by float64 labels.
    """
    X = X if isinstance(X, DataMatrix) else DataMatrix(X)
    y = np.asarray(y, dtype="<f8")
    ycols = 1 if y.ndim == 1 else y.shape[1]
    width = 4 if X.dtype == np.float32 else 8
    vt = "<f4" if width == 4 else "<f8"
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _BIN_VERSION, X.n, X.p, int(X.is_sparse),
                              width, ycols, X.nnz))
        if X.is_sparse:
            fh.write(X.raw.data.astype(vt).tobytes())
            fh.write(X.raw.indices.astype("<i8").tobytes())
            fh.write(X.raw.indptr.astype("<i8").tobytes())
        else:
            fh.write(X.raw.astype(vt).tobytes())
        fh.write(y.tobytes())


def load_binary(path):
    """Inverse of :func:`save_binary`; returns ``(DataMatrix, labels)``."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError("truncated binary dataset header")
        magic, version, n, p, layout, width, ycols, nnz = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError("not a vrsolve binary dataset")
        if version != _BIN_VERSION:
            raise ValueError("unsupported binary dataset version %d" % version)
        vt = {4: "<f4", 8: "<f8"}.get(width)
        if vt is None:
            raise ValueError("bad precision field %d" % width)

        def read(count, dt):
            buf = fh.read(count * np.dtype(dt).itemsize)
            if len(buf) != count * np.dtype(dt).itemsize:
                raise ValueError("truncated binary dataset")
            return np.frombuffer(buf, dtype=dt).astype(dt[1:], copy=True)

        if layout == 1:
            data = read(nnz, vt)
            indices = read(nnz, "<i8")
            indptr = read(n + 1, "<i8")
            X = sparse.csr_matrix((data, indices, indptr), shape=(n, p))
        else:
            X = read(n * p, vt).reshape(n, p)
        y = read(n * ycols, "<f8")
        if ycols > 1:
            y = y.reshape(n, ycols)
    return DataMatrix(X), y
