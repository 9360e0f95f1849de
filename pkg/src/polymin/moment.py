"""Linear forms as moment sequences and their truncated Hankel matrices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from .poly import Monomial, MonomialBasis, Polynomial, mono_mul, mono_one

#: relative eigenvalue threshold for rank decisions
TAU_RANK = 1e-7


class MissingMomentError(KeyError):
    def __init__(self, monomial: Monomial):
        self.monomial = monomial
        super().__init__(f"moment for exponent {monomial} is not defined")


@dataclass(frozen=True)
class MomentVector:
    """Values ``lambda_alpha`` of a linear form on a set of monomials."""

    values: Mapping[Monomial, float]
    nvars: int

    def __getitem__(self, m: Monomial) -> float:
        try:
            return self.values[tuple(m)]
        except KeyError:
            raise MissingMomentError(tuple(m)) from None

    def __contains__(self, m) -> bool:
        return tuple(m) in self.values

    def apply(self, p: Polynomial) -> float:
        """``Lambda(p) = sum p_alpha lambda_alpha``."""
        return float(sum(c * self[m] for m, c in p.items()))

    @classmethod
    def evaluation(cls, point: Sequence[float], monomials, weight: float = 1.0) -> "MomentVector":
        z = np.asarray(point, dtype=float)
        vals = {tuple(m): weight * float(np.prod(z ** np.asarray(m))) for m in monomials}
        return cls(vals, len(z))

    @classmethod
    def mixture(cls, points, weights, monomials) -> "MomentVector":
        """Moments of ``sum_i w_i ev_{z_i}`` on ``monomials``."""
        vals: Dict[Monomial, float] = {}
        for m in monomials:
            e = np.asarray(m)
            vals[tuple(m)] = float(sum(w * np.prod(np.asarray(z, float) ** e) for z, w in zip(points, weights)))
        return cls(vals, len(points[0]))

    def __add__(self, other: "MomentVector") -> "MomentVector":
        keys = set(self.values) & set(other.values)
        return MomentVector({k: self.values[k] + other.values[k] for k in keys}, self.nvars)


@dataclass(frozen=True)
class TruncatedHankel:
    matrix: np.ndarray
    basis: MonomialBasis
    moments: MomentVector

    @property
    def size(self) -> int:
        return len(self.basis)


def build_hankel(lam: MomentVector, B: MonomialBasis) -> TruncatedHankel:
    """``H[a, b] = lambda_{a+b}`` for ``a, b`` in ``B``."""
    monos = B.monomials
    k = len(monos)
    H = np.empty((k, k))
    for i in range(k):
        for j in range(i, k):
            H[i, j] = H[j, i] = lam[mono_mul(monos[i], monos[j])]
    return TruncatedHankel(H, B, lam)


def _spectrum(H: np.ndarray):
    w, V = np.linalg.eigh((H + H.T) / 2)
    return w, V


def numerical_rank(H: np.ndarray, tau_rank: float = TAU_RANK) -> int:
    if H.size == 0:
        return 0
    w, _ = _spectrum(H)
    return int(np.sum(w > tau_rank * max(np.max(np.abs(w)), 1.0)))


def kernel(H: TruncatedHankel, tau_rank: float = TAU_RANK) -> List[Polynomial]:
    """Kernel of the Hankel matrix as polynomials supported on its basis.

    Eigenvectors with eigenvalue <= ``tau_rank * max(|lambda_max|, 1)`` span
    the kernel.  Each polynomial is scaled so its largest coefficient has
    absolute value 1.
    """
    w, V = _spectrum(H.matrix)
    if w.size == 0:
        return []
    thresh = tau_rank * max(np.max(np.abs(w)), 1.0)
    out = []
    monos = H.basis.monomials
    n = H.basis.nvars
    for k in np.flatnonzero(w <= thresh):
        v = V[:, k]
        j = int(np.argmax(np.abs(v)))
        v = v / v[j]
        out.append(Polynomial({m: c for m, c in zip(monos, v) if c != 0.0}, n))
    return out


def hankel_rank(lam: MomentVector, B: MonomialBasis, tau_rank: float = TAU_RANK) -> int:
    return numerical_rank(build_hankel(lam, B).matrix, tau_rank)


def flat_extension_test(lam: MomentVector, B: MonomialBasis, tau_rank: float = TAU_RANK) -> bool:
    """True iff ``rank H^{B+} == rank H^B == |B|``.

    ``lam`` must be defined on ``B+ * B+``.
    """
    Bp = B.prolong()
    r_plus = hankel_rank(lam, Bp, tau_rank)
    r = hankel_rank(lam, B, tau_rank)
    return r == len(B) and r_plus == r


def check_positive(H: TruncatedHankel | np.ndarray, tau_psd: float = 1e-7) -> Tuple[bool, float]:
    """``(min eig >= -tau_psd * max(1, max eig), min eig)``."""
    M = H.matrix if isinstance(H, TruncatedHankel) else np.asarray(H, dtype=float)
    if M.size == 0:
        return True, 0.0
    w = np.linalg.eigvalsh((M + M.T) / 2)
    lo = float(w[0])
    return lo >= -tau_psd * max(1.0, float(w[-1])), lo
