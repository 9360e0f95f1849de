"""Inner loops of the interior-point solver.

Constraint matrices of moment problems are very sparse (one Hankel
anti-diagonal per moment), so they are kept in a flat coordinate layout::

    ptr[k] : ptr[k+1]   entries of matrix k
    row, col, val       full symmetric storage (both triangles)

Each kernel has a numba ``@njit`` version and a pure-numpy version.  The
numpy path is selected when numba is unavailable or when the environment
variable ``POLYMIN_DISABLE_NUMBA`` is set to a non-empty value other than
``0``; :func:`set_backend` switches at runtime (used by the benchmark).
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    v = os.environ.get("POLYMIN_DISABLE_NUMBA", "")
    return v not in ("", "0")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(*args, **kwargs):
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    return lambda f: f


class SparseStack:
    """``m`` symmetric ``n x n`` matrices in coordinate form."""

    def __init__(self, n: int, ptr, row, col, val):
        self.n = int(n)
        self.ptr = np.ascontiguousarray(ptr, dtype=np.int64)
        self.row = np.ascontiguousarray(row, dtype=np.int64)
        self.col = np.ascontiguousarray(col, dtype=np.int64)
        self.val = np.ascontiguousarray(val, dtype=np.float64)
        self._dense = None

    @property
    def m(self) -> int:
        return len(self.ptr) - 1

    @classmethod
    def from_dense(cls, mats, tol: float = 0.0) -> "SparseStack":
        mats = [np.asarray(a, dtype=float) for a in mats]
        n = mats[0].shape[0] if mats else 0
        ptr, row, col, val = [0], [], [], []
        for a in mats:
            r, c = np.nonzero(np.abs(a) > tol)
            row.extend(r)
            col.extend(c)
            val.extend(a[r, c])
            ptr.append(len(row))
        return cls(n, ptr, row, col, val)

    def dense(self) -> np.ndarray:
        if self._dense is None:
            out = np.zeros((self.m, self.n, self.n))
            for k in range(self.m):
                s, e = self.ptr[k], self.ptr[k + 1]
                np.add.at(out[k], (self.row[s:e], self.col[s:e]), self.val[s:e])
            self._dense = out
        return self._dense

    def matrix(self, k: int) -> np.ndarray:
        return self.dense()[k]


# -- numba kernels ---------------------------------------------------------


@njit(cache=True)
def _schur_nb(W, ptr, row, col, val):
    m = ptr.shape[0] - 1
    n = W.shape[0]
    M = np.zeros((m, m))
    G = np.empty((n, n))
    for j in range(m):
        # G = W F_j W accumulated entry by entry
        G[:, :] = 0.0
        for k in range(ptr[j], ptr[j + 1]):
            r = row[k]
            s = col[k]
            v = val[k]
            for p in range(n):
                wpr = v * W[p, r]
                for q in range(n):
                    G[p, q] += wpr * W[s, q]
        for i in range(j, m):
            acc = 0.0
            for k in range(ptr[i], ptr[i + 1]):
                acc += val[k] * G[col[k], row[k]]
            M[i, j] = acc
            M[j, i] = acc
    return M


@njit(cache=True)
def _apply_nb(Z, ptr, row, col, val):
    m = ptr.shape[0] - 1
    out = np.zeros(m)
    for i in range(m):
        acc = 0.0
        for k in range(ptr[i], ptr[i + 1]):
            acc += val[k] * Z[row[k], col[k]]
        out[i] = acc
    return out


@njit(cache=True)
def _combine_nb(y, n, ptr, row, col, val):
    out = np.zeros((n, n))
    m = ptr.shape[0] - 1
    for i in range(m):
        yi = y[i]
        if yi != 0.0:
            for k in range(ptr[i], ptr[i + 1]):
                out[row[k], col[k]] += yi * val[k]
    return out


@njit(cache=True)
def _congruence_nb(G, ptr, row, col, val):
    m = ptr.shape[0] - 1
    n = G.shape[0]
    p = n * (n + 1) // 2
    A = np.zeros((p, m))
    T = np.empty((n, n))
    r2 = np.sqrt(2.0)
    for i in range(m):
        T[:, :] = 0.0
        for k in range(ptr[i], ptr[i + 1]):
            r = row[k]
            s = col[k]
            v = val[k]
            for a in range(n):
                gra = v * G[r, a]
                for b in range(n):
                    T[a, b] += gra * G[s, b]
        q = 0
        for a in range(n):
            A[q, i] = T[a, a]
            q += 1
            for b in range(a + 1, n):
                A[q, i] = r2 * T[a, b]
                q += 1
    return A


# -- numpy kernels ---------------------------------------------------------


def _schur_np(W, S: SparseStack):
    D = S.dense()
    WFW = W @ D @ W
    m = D.shape[0]
    return D.reshape(m, -1) @ WFW.reshape(m, -1).T


def _svec_index(n):
    rows, cols, w = [], [], []
    for a in range(n):
        rows.append(a)
        cols.append(a)
        w.append(1.0)
        for b in range(a + 1, n):
            rows.append(a)
            cols.append(b)
            w.append(np.sqrt(2.0))
    return np.array(rows), np.array(cols), np.array(w)


def _congruence_np(G, S: SparseStack):
    D = S.dense()
    T = G.T @ D @ G
    r, c, w = _svec_index(S.n)
    return (T[:, r, c] * w).T.copy()


def _apply_np(Z, S: SparseStack):
    out = np.zeros(S.m)
    np.add.at(out, np.repeat(np.arange(S.m), np.diff(S.ptr)), S.val * Z[S.row, S.col])
    return out


def _combine_np(y, S: SparseStack):
    out = np.zeros((S.n, S.n))
    coef = np.repeat(np.asarray(y, dtype=float), np.diff(S.ptr)) * S.val
    np.add.at(out, (S.row, S.col), coef)
    return out


# -- dispatch --------------------------------------------------------------


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` kernels for subsequent calls."""
    global USE_NUMBA
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        USE_NUMBA = True
    elif name == "numpy":
        USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def schur_complement(W: np.ndarray, S: SparseStack) -> np.ndarray:
    """``M[i, j] = <F_i, W F_j W>`` for symmetric ``W``."""
    if S.m == 0:
        return np.zeros((0, 0))
    if USE_NUMBA:
        return _schur_nb(np.ascontiguousarray(W), S.ptr, S.row, S.col, S.val)
    return _schur_np(W, S)


def congruence(G: np.ndarray, S: SparseStack) -> np.ndarray:
    """Columns ``svec(G' F_i G)``, off-diagonals scaled by sqrt(2) so dot products are trace products.

    ``A' A`` is the Schur matrix for ``W = G G'``; working with ``A`` halves the
    condition number exponent of the Newton system.
    """
    if S.m == 0:
        return np.zeros((S.n * (S.n + 1) // 2, 0))
    if USE_NUMBA:
        return _congruence_nb(np.ascontiguousarray(G), S.ptr, S.row, S.col, S.val)
    return _congruence_np(G, S)


def svec(X: np.ndarray) -> np.ndarray:
    r, c, w = _svec_index(X.shape[0])
    return X[r, c] * w


def smat(v: np.ndarray, n: int) -> np.ndarray:
    r, c, w = _svec_index(n)
    X = np.zeros((n, n))
    X[r, c] = v / w
    X[c, r] = v / w
    return X


def apply_adjoint(Z: np.ndarray, S: SparseStack) -> np.ndarray:
    """``out[i] = <F_i, Z>``."""
    if USE_NUMBA:
        return _apply_nb(np.ascontiguousarray(Z), S.ptr, S.row, S.col, S.val)
    return _apply_np(Z, S)


def combine(y: np.ndarray, S: SparseStack) -> np.ndarray:
    """``sum_i y_i F_i``."""
    if USE_NUMBA:
        return _combine_nb(np.ascontiguousarray(y, dtype=np.float64), S.n, S.ptr, S.row, S.col, S.val)
    return _combine_np(y, S)
