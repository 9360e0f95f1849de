"""Sparse multivariate polynomials with real coefficients.

Monomials are plain tuples of non-negative exponents, so they hash, compare
and can be used as dictionary keys without a wrapper class.  The canonical
iteration order is graded lexicographic (:func:`grlex_key`).
"""
from __future__ import annotations

import itertools
import math
import warnings
from typing import Dict, Iterable, Iterator, List, Mapping, Sequence, Tuple

import numpy as np

Monomial = Tuple[int, ...]

#: relative threshold used when pruning cancelled coefficients
PRUNE_EPS = 1e-12


def grlex_key(m: Monomial):
    return (sum(m), m)


def mono_one(n: int) -> Monomial:
    return (0,) * n


def mono_var(n: int, i: int) -> Monomial:
    e = [0] * n
    e[i] = 1
    return tuple(e)


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    return tuple(x + y for x, y in zip(a, b))


def mono_deg(m: Monomial) -> int:
    return sum(m)


def mono_divides(a: Monomial, b: Monomial) -> bool:
    """True if ``a`` divides ``b`` (coordinate-wise <=)."""
    return all(x <= y for x, y in zip(a, b))


def monomials_up_to(n: int, d: int) -> List[Monomial]:
    """All monomials in ``n`` variables of degree <= ``d`` in graded lex order."""
    out = []
    for k in range(d + 1):
        out.extend(_monomials_of_degree(n, k))
    out.sort(key=grlex_key)
    return out


def _monomials_of_degree(n: int, k: int) -> Iterator[Monomial]:
    # stars and bars
    for bars in itertools.combinations(range(k + n - 1), n - 1):
        prev = -1
        e = []
        for b in bars:
            e.append(b - prev - 1)
            prev = b
        e.append(k + n - 2 - prev)
        yield tuple(e)


class Polynomial:
    """Immutable sparse polynomial ``sum c_m x^m``.

    Parameters
    ----------
    terms : mapping Monomial -> float
        Exact zeros are dropped on construction.
    nvars : int
    """

    __slots__ = ("_terms", "_nvars", "_hash")

    def __init__(self, terms: Mapping[Monomial, float] | None = None, nvars: int = 0):
        if terms is None:
            terms = {}
        clean = {}
        for m, c in terms.items():
            if len(m) != nvars:
                raise ValueError(f"monomial {m} has wrong length for {nvars} variables")
            c = float(c)
            if c != 0.0:
                clean[tuple(int(e) for e in m)] = c
        self._terms = clean
        self._nvars = nvars
        self._hash = None

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls({}, nvars)

    @classmethod
    def constant(cls, c: float, nvars: int) -> "Polynomial":
        return cls({mono_one(nvars): c}, nvars)

    @classmethod
    def monomial(cls, m: Monomial, c: float = 1.0) -> "Polynomial":
        return cls({tuple(m): c}, len(m))

    @classmethod
    def variable(cls, i: int, nvars: int) -> "Polynomial":
        return cls({mono_var(nvars, i): 1.0}, nvars)

    @classmethod
    def from_vector(cls, coeffs: Sequence[float], monos: Sequence[Monomial], nvars: int) -> "Polynomial":
        return cls({m: c for m, c in zip(monos, coeffs) if c != 0.0}, nvars)

    # -- basic accessors ----------------------------------------------------
    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def terms(self) -> Dict[Monomial, float]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def support(self) -> List[Monomial]:
        return sorted(self._terms, key=grlex_key)

    def coeff(self, m: Monomial) -> float:
        return self._terms.get(tuple(m), 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> float:
        """Total degree; ``-inf`` for the zero polynomial."""
        if not self._terms:
            return -math.inf
        return max(sum(m) for m in self._terms)

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def to_vector(self, monos: Sequence[Monomial]) -> np.ndarray:
        return np.array([self._terms.get(m, 0.0) for m in monos])

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other: "Polynomial"):
        if other._nvars != self._nvars:
            raise ValueError("polynomials live in different rings")

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            self._check(other)
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(float(other), self._nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return _linear_combination([(1.0, self), (1.0, other)], self._nvars)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial({m: -c for m, c in self._terms.items()}, self._nvars)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return _linear_combination([(1.0, self), (-1.0, other)], self._nvars)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        acc: Dict[Monomial, float] = {}
        mag: Dict[Monomial, float] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = mono_mul(m1, m2)
                p = c1 * c2
                acc[m] = acc.get(m, 0.0) + p
                mag[m] = mag.get(m, 0.0) + abs(p)
        return Polynomial(_prune(acc, mag), self._nvars)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a non-negative integer")
        out = Polynomial.constant(1.0, self._nvars)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def scale(self, a: float) -> "Polynomial":
        if a == 0.0:
            return Polynomial.zero(self._nvars)
        return Polynomial({m: a * c for m, c in self._terms.items()}, self._nvars)

    def mul_monomial(self, mono: Monomial, c: float = 1.0) -> "Polynomial":
        return Polynomial({mono_mul(m, mono): c * v for m, v in self._terms.items()}, self._nvars)

    def diff(self, i: int) -> "Polynomial":
        """Formal partial derivative with respect to variable ``i``."""
        out = {}
        for m, c in self._terms.items():
            e = m[i]
            if e:
                mm = list(m)
                mm[i] = e - 1
                out[tuple(mm)] = c * e
        return Polynomial(out, self._nvars)

    def __call__(self, point) -> float:
        return evaluate(self, point)

    # -- comparison ---------------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self._nvars == other._nvars and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self._nvars, frozenset(self._terms.items())))
        return self._hash

    def allclose(self, other: "Polynomial", tol: float = 1e-10) -> bool:
        keys = set(self._terms) | set(other._terms)
        scale = max(1.0, self.max_abs_coeff(), other.max_abs_coeff())
        return all(abs(self.coeff(k) - other.coeff(k)) <= tol * scale for k in keys)

    def __repr__(self):
        from .parser import format_polynomial

        names = [f"x{i + 1}" for i in range(self._nvars)]
        return f"Polynomial({format_polynomial(self, names)!r})"


def _prune(acc: Mapping[Monomial, float], mag: Mapping[Monomial, float]) -> Dict[Monomial, float]:
    # drop coefficients that are pure cancellation noise relative to the terms that produced them
    return {m: c for m, c in acc.items() if abs(c) > PRUNE_EPS * mag[m]}


def _linear_combination(pairs: Iterable[Tuple[float, Polynomial]], nvars: int) -> Polynomial:
    acc: Dict[Monomial, float] = {}
    mag: Dict[Monomial, float] = {}
    for a, p in pairs:
        for m, c in p._terms.items():
            v = a * c
            acc[m] = acc.get(m, 0.0) + v
            mag[m] = mag.get(m, 0.0) + abs(v)
    return Polynomial(_prune(acc, mag), nvars)


def linear_combination(pairs: Iterable[Tuple[float, Polynomial]], nvars: int) -> Polynomial:
    """``sum a_k p_k`` with a single pruning pass."""
    return _linear_combination(pairs, nvars)


def gradient(f: Polynomial) -> List[Polynomial]:
    """Partial derivatives ``(df/dx_1, ..., df/dx_n)``.

    A constant input yields the zero vector and emits a :class:`UserWarning`,
    since the corresponding minimizer ideal is the whole ring.
    """
    g = [f.diff(i) for i in range(f.nvars)]
    if all(p.is_zero() for p in g):
        warnings.warn("gradient of a constant polynomial is identically zero", stacklevel=2)
    return g


def evaluate(p: Polynomial, point) -> float:
    z = np.asarray(point, dtype=float).ravel()
    if z.shape[0] != p.nvars:
        raise ValueError(f"point has {z.shape[0]} coordinates, polynomial has {p.nvars} variables")
    total = 0.0
    for m, c in p.items():
        v = c
        for zi, e in zip(z, m):
            if e:
                v *= zi ** e
        total += v
    return float(total)


class MonomialBasis:
    """Ordered finite set of monomials (graded lex order).

    Most algorithms here require the set to be *connected to 1*: it contains
    ``1`` and every other member is ``x_i * m'`` for some member ``m'``.
    """

    __slots__ = ("_monos", "_index", "_nvars")

    def __init__(self, monomials: Iterable[Monomial], nvars: int | None = None):
        ms = sorted({tuple(int(e) for e in m) for m in monomials}, key=grlex_key)
        if nvars is None:
            if not ms:
                raise ValueError("nvars required for an empty basis")
            nvars = len(ms[0])
        if any(len(m) != nvars for m in ms):
            raise ValueError("inconsistent monomial lengths")
        self._monos = tuple(ms)
        self._index = {m: i for i, m in enumerate(ms)}
        self._nvars = nvars

    @classmethod
    def up_to_degree(cls, nvars: int, d: int) -> "MonomialBasis":
        return cls(monomials_up_to(nvars, d), nvars)

    @property
    def nvars(self) -> int:
        return self._nvars

    @property
    def monomials(self) -> Tuple[Monomial, ...]:
        return self._monos

    def index(self, m: Monomial) -> int:
        return self._index[m]

    def __contains__(self, m) -> bool:
        return tuple(m) in self._index

    def __iter__(self):
        return iter(self._monos)

    def __len__(self) -> int:
        return len(self._monos)

    def __eq__(self, other):
        if isinstance(other, MonomialBasis):
            return self._monos == other._monos
        return NotImplemented

    def __hash__(self):
        return hash(self._monos)

    def __repr__(self):
        return f"MonomialBasis({list(self._monos)})"

    def max_degree(self) -> int:
        return max((sum(m) for m in self._monos), default=-1)

    def truncate(self, d: int) -> "MonomialBasis":
        return MonomialBasis([m for m in self._monos if sum(m) <= d], self._nvars)

    def is_connected_to_one(self) -> bool:
        one = mono_one(self._nvars)
        if one not in self._index:
            return False
        for m in self._monos:
            if m == one:
                continue
            if not any(_div_var(m, i) in self._index for i in range(self._nvars) if m[i] > 0):
                return False
        return True

    def prolong(self) -> "MonomialBasis":
        """``B+ = B u x_1 B u ... u x_n B``."""
        out = set(self._monos)
        for m in self._monos:
            for i in range(self._nvars):
                out.add(_mul_var(m, i))
        return MonomialBasis(out, self._nvars)

    def border(self) -> List[Monomial]:
        """``dB = B+ minus B`` in graded lex order."""
        return [m for m in self.prolong() if m not in self._index]

    def products(self) -> List[Monomial]:
        """Distinct products ``a*b`` for ``a, b`` in the basis (graded lex order)."""
        out = set()
        for a, b in itertools.combinations_with_replacement(self._monos, 2):
            out.add(mono_mul(a, b))
        return sorted(out, key=grlex_key)


def _mul_var(m: Monomial, i: int) -> Monomial:
    e = list(m)
    e[i] += 1
    return tuple(e)


def _div_var(m: Monomial, i: int) -> Monomial:
    e = list(m)
    e[i] -= 1
    return tuple(e)


def prolong(B: MonomialBasis) -> MonomialBasis:
    return B.prolong()


def b_index(B: MonomialBasis, m: Monomial) -> int:
    """Smallest ``k`` with ``m`` in the ``k``-th prolongation of ``B``.

    Breadth-first search downward: ``delta(m) = 0`` for members and otherwise
    ``1 + min_i delta(m / x_i)``.  Requires ``1`` in ``B``.
    """
    m = tuple(m)
    n = B.nvars
    if mono_one(n) not in B:
        raise ValueError("b_index requires 1 in the basis")
    cache: Dict[Monomial, int] = {}

    def rec(u: Monomial) -> int:
        if u in B:
            return 0
        if u in cache:
            return cache[u]
        best = min(rec(_div_var(u, i)) for i in range(n) if u[i] > 0)
        cache[u] = best + 1
        return best + 1

    return rec(m)


def b_index_bfs(B: MonomialBasis, m: Monomial) -> int:
    """Reference implementation of :func:`b_index` by explicit prolongation."""
    m = tuple(m)
    level = set(B.monomials)
    k = 0
    while m not in level:
        level = set(MonomialBasis(level, B.nvars).prolong().monomials)
        k += 1
        if k > sum(m) + 1:
            raise RuntimeError("monomial not reached")
    return k
