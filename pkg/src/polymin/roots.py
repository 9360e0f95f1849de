"""Eigenvalue method: multiplication matrices on the quotient and their common eigenvectors."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .border import RewritingFamily
from .poly import MonomialBasis, Polynomial, _mul_var, gradient, mono_one


class RootExtractionError(RuntimeError):
    pass


@dataclass
class MultiplicationMatrices:
    """``matrices[i][:, j]`` holds the B-coordinates of ``pi(x_i * b_j)``."""

    matrices: List[np.ndarray]
    basis: MonomialBasis

    def combination(self, c: Sequence[float]) -> np.ndarray:
        return sum(ci * X for ci, X in zip(c, self.matrices))

    def commutation_residual(self) -> float:
        """Largest ``|X_i X_j - X_j X_i|`` entry relative to ``max(1, max |X|)``."""
        scale = max([1.0] + [float(np.max(np.abs(X))) for X in self.matrices])
        worst = 0.0
        X = self.matrices
        for i in range(len(X)):
            for j in range(i + 1, len(X)):
                worst = max(worst, float(np.max(np.abs(X[i] @ X[j] - X[j] @ X[i]))))
        return worst / scale ** 2


def build_multiplication_matrices(F: RewritingFamily, B: Optional[MonomialBasis] = None
                                  ) -> MultiplicationMatrices:
    """Matrices of multiplication by each variable in the basis ``B`` of the quotient.

    Raises
    ------
    CompletenessError
        If some ``x_i * b`` in the border has no rule.
    """
    B = F.basis if B is None else B
    if B != F.basis:
        raise ValueError("basis does not match the family")
    mats = []
    for i in range(B.nvars):
        targets = [_mul_var(b, i) for b in B]
        mats.append(F.normal_form_matrix(targets).T.copy())
    return MultiplicationMatrices(mats, B)


def _separated(w: np.ndarray, tol_sep: float) -> bool:
    if len(w) < 2:
        return True
    scale = max(1.0, float(np.max(np.abs(w))))
    d = np.abs(w[:, None] - w[None, :])
    np.fill_diagonal(d, np.inf)
    return float(np.min(d)) > tol_sep * scale


def extract_points(M: MultiplicationMatrices, seed: int = 0, tol_imag: float = 1e-6,
                   tol_dedup: float = 1e-6, tol_sep: float = 1e-8, retries: int = 5,
                   tol_commute: float = 1e-6) -> List[np.ndarray]:
    """Real points of the variety from eigenvectors of a random combination ``X_c^T``.

    Each eigenvector is an evaluation vector up to scale; it is normalised at
    the monomial 1 and coordinate ``i`` is read off as ``v . pi(x_i)``.
    """
    B = M.basis
    n = B.nvars
    if M.commutation_residual() > tol_commute:
        raise RootExtractionError("multiplication matrices do not commute")
    i1 = B.index(mono_one(n))
    coord = np.stack([X[:, i1] for X in M.matrices])  # row i: coordinates of pi(x_i)
    rng = np.random.default_rng(seed)
    for _ in range(retries):
        c = rng.normal(size=n)
        c /= np.linalg.norm(c)
        w, V = np.linalg.eig(M.combination(c).T)
        if not _separated(w, tol_sep):
            continue
        pts: List[np.ndarray] = []
        for k in range(len(w)):
            v = V[:, k]
            if abs(v[i1]) < 1e-12 * np.max(np.abs(v)):
                continue
            v = v / v[i1]
            z = coord @ v
            if np.max(np.abs(z.imag)) > tol_imag * (1.0 + np.max(np.abs(z.real))) or abs(w[k].imag) > tol_imag:
                continue
            z = z.real.copy()
            if any(np.linalg.norm(z - p) <= tol_dedup * (1.0 + np.linalg.norm(z)) for p in pts):
                continue
            pts.append(z)
        pts.sort(key=lambda p: tuple(np.round(p, 8)))
        return pts
    raise RootExtractionError("non-simple spectrum: eigenvalues of the random combination "
                              f"stayed clustered after {retries} attempts")


def eigen_consistency(M: MultiplicationMatrices, points: Sequence[np.ndarray]) -> float:
    """Largest distance from an eigenvalue of some ``X_i`` to the nearest ``i``-th coordinate."""
    if not points:
        return 0.0
    P = np.asarray(points)
    worst = 0.0
    for i, X in enumerate(M.matrices):
        for lam in np.linalg.eigvals(X):
            worst = max(worst, float(np.min(np.abs(P[:, i] - lam))))
    return worst


@dataclass
class Certificate:
    point: np.ndarray
    value: float
    gradient_norm: float
    rule_residual: float

    def as_dict(self) -> dict:
        return {
            "point": [float(x) for x in self.point],
            "value": float(self.value),
            "gradient_norm": float(self.gradient_norm),
            "rule_residual": float(self.rule_residual),
        }


def certify(points: Sequence[Sequence[float]], f: Polynomial,
            F: RewritingFamily | Sequence[Polynomial]) -> List[Certificate]:
    """``f(z)``, ``|grad f(z)|_inf`` and the largest generator residual at each point."""
    grad = gradient(f)
    gens = F.polynomials() if isinstance(F, RewritingFamily) else list(F)
    out = []
    for z in points:
        z = np.asarray(z, dtype=float)
        g = max((abs(d(z)) for d in grad), default=0.0)
        r = max((abs(p(z)) for p in gens), default=0.0)
        out.append(Certificate(z, f(z), g, r))
    return out
