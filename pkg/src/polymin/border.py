"""Rewriting families, the normal-form projection and border-basis completion.

A rewriting family for a monomial set ``B`` (connected to 1) is a set of rules
``gamma -> tail`` where ``gamma`` lies in the border of ``B`` and ``tail`` is
supported in ``B``.  The rule polynomial is ``gamma - tail``.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sympy.polys.domains import QQ
from sympy.polys.matrices import DomainMatrix

from .poly import (
    Monomial,
    MonomialBasis,
    Polynomial,
    _div_var,
    _mul_var,
    b_index,
    grlex_key,
    mono_one,
    monomials_up_to,
)

log = logging.getLogger(__name__)


class BorderBasisError(RuntimeError):
    pass


class CompletenessError(BorderBasisError):
    """A border monomial needed by the normal form has no rule."""

    def __init__(self, monomial: Monomial):
        self.monomial = monomial
        super().__init__(f"rewriting family is not complete: no rule for border monomial {monomial}")


class UnitIdealError(BorderBasisError):
    def __init__(self):
        super().__init__("ideal is the whole ring (1 is in the span of the relations)")


@dataclass(frozen=True)
class RewriteRule:
    leading: Monomial
    tail: Polynomial

    def __post_init__(self):
        if self.tail.degree > sum(self.leading):
            raise ValueError(f"rule for {self.leading} is not graded")

    @property
    def polynomial(self) -> Polynomial:
        return Polynomial.monomial(self.leading) - self.tail


class RewritingFamily:
    """Rules ``gamma -> tail`` for a monomial basis ``B``.

    Normal forms are memoised per monomial; the family itself is treated as
    immutable once built.
    """

    def __init__(self, rules: Mapping[Monomial, Polynomial] | Iterable[RewriteRule], basis: MonomialBasis):
        if isinstance(rules, Mapping):
            rr = {tuple(g): RewriteRule(tuple(g), t) for g, t in rules.items()}
        else:
            rr = {}
            for r in rules:
                if r.leading in rr:
                    raise ValueError(f"two rules share the leading monomial {r.leading}")
                rr[r.leading] = r
        self.basis = basis
        self.nvars = basis.nvars
        self._border = set(basis.border())
        for g, r in rr.items():
            if g not in self._border:
                raise ValueError(f"leading monomial {g} is not in the border of the basis")
            bad = [m for m in r.tail.support() if m not in basis]
            if bad:
                raise ValueError(f"tail of rule {g} leaves the basis: {bad}")
        self.rules: Dict[Monomial, RewriteRule] = dict(sorted(rr.items(), key=lambda kv: grlex_key(kv[0])))
        self._nf: Dict[Monomial, Dict[Monomial, float]] = {}
        self._delta: Dict[Monomial, int] = {}

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules.values())

    def polynomials(self) -> List[Polynomial]:
        return [r.polynomial for r in self.rules.values()]

    def max_coefficient(self) -> float:
        return max((r.polynomial.max_abs_coeff() for r in self.rules.values()), default=1.0)

    def is_complete(self, t: int) -> bool:
        return all(m in self.rules for m in self._border if sum(m) <= t)

    def missing(self, t: int) -> List[Monomial]:
        return sorted((m for m in self._border if sum(m) <= t and m not in self.rules), key=grlex_key)

    # -- normal form --------------------------------------------------------
    def _index(self, m: Monomial) -> int:
        d = self._delta.get(m)
        if d is None:
            d = b_index(self.basis, m)
            self._delta[m] = d
        return d

    def _nf_monomial(self, m: Monomial) -> Dict[Monomial, float]:
        hit = self._nf.get(m)
        if hit is not None:
            return hit
        if m in self.basis:
            out = {m: 1.0}
        elif m in self._border:
            rule = self.rules.get(m)
            if rule is None:
                raise CompletenessError(m)
            out = rule.tail.terms
        else:
            k = self._index(m)
            i0 = next(i for i in range(self.nvars) if m[i] > 0 and self._index(_div_var(m, i)) == k - 1)
            inner = self._nf_monomial(_div_var(m, i0))
            out = self._reduce_shifted(inner, i0)
        self._nf[m] = out
        return out

    def _reduce_shifted(self, p: Mapping[Monomial, float], i: int) -> Dict[Monomial, float]:
        # pi(x_i * p) for p supported in B: every x_i*b lies in B or its border
        acc: Dict[Monomial, float] = {}
        mag: Dict[Monomial, float] = {}
        for b, c in p.items():
            for mm, cc in self._nf_monomial(_mul_var(b, i)).items():
                v = c * cc
                acc[mm] = acc.get(mm, 0.0) + v
                mag[mm] = mag.get(mm, 0.0) + abs(v)
        return {m: c for m, c in acc.items() if abs(c) > 1e-14 * mag[m]}

    def normal_form(self, p: Polynomial, t: Optional[int] = None) -> Polynomial:
        """Projection of ``p`` onto span(B) along the rules.

        Raises :class:`CompletenessError` if a border monomial needed on the
        way has no rule.
        """
        if t is not None and p.degree > t:
            raise ValueError(f"polynomial of degree {p.degree} exceeds t={t}")
        acc: Dict[Monomial, float] = {}
        mag: Dict[Monomial, float] = {}
        for m, c in p.items():
            for mm, cc in self._nf_monomial(m).items():
                v = c * cc
                acc[mm] = acc.get(mm, 0.0) + v
                mag[mm] = mag.get(mm, 0.0) + abs(v)
        return Polynomial({m: c for m, c in acc.items() if abs(c) > 1e-14 * mag[m]}, self.nvars)

    def normal_form_matrix(self, monos: Sequence[Monomial]) -> np.ndarray:
        """Rows: B-coordinates of ``pi(m)`` for each ``m`` in ``monos``."""
        idx = {b: j for j, b in enumerate(self.basis)}
        out = np.zeros((len(monos), len(self.basis)))
        for r, m in enumerate(monos):
            for b, c in self._nf_monomial(tuple(m)).items():
                out[r, idx[b]] = c
        return out


def normal_form(F: RewritingFamily, p: Polynomial, t: Optional[int] = None) -> Polynomial:
    return F.normal_form(p, t)


def cplus_polynomials(F: RewritingFamily, t: int) -> List[Polynomial]:
    """Commutation and prolongation polynomials of ``F`` of degree <= ``t``.

    Emits ``m*f - m'*f'`` for multipliers in ``{1, x_1, .., x_n}`` whenever
    ``m*gamma(f) == m'*gamma(f')``, and ``m*f`` alone when ``m*gamma(f)`` is in
    ``B`` or is a border monomial that no rule covers.
    """
    n = F.nvars
    B = F.basis
    border = F._border
    one = mono_one(n)
    mults = [one] + [tuple(1 if k == i else 0 for k in range(n)) for i in range(n)]
    groups: Dict[Monomial, List[Tuple[Monomial, RewriteRule]]] = {}
    for rule in F.rules.values():
        for m in mults:
            prod = tuple(a + b for a, b in zip(m, rule.leading))
            if sum(prod) <= t:
                groups.setdefault(prod, []).append((m, rule))
    out: List[Polynomial] = []
    seen = set()

    def emit(p: Polynomial):
        if p.is_zero():
            return
        key = p
        if key not in seen:
            seen.add(key)
            out.append(p)

    for prod in sorted(groups, key=grlex_key):
        items = groups[prod]
        for (m1, r1), (m2, r2) in itertools.combinations(items, 2):
            emit(r1.polynomial.mul_monomial(m1) - r2.polynomial.mul_monomial(m2))
        if prod in B or (prod in border and prod not in F.rules):
            for m, r in items:
                emit(r.polynomial.mul_monomial(m))
    return out


def check_border_basis(F: RewritingFamily, B: Optional[MonomialBasis] = None, t: int = 0,
                       tol: float = 1e-8) -> Tuple[bool, float]:
    """Reduce every C+ polynomial of degree <= ``t``; return ``(ok, max residual)``.

    The residual is the largest coefficient of any reduced polynomial and is
    compared against ``tol`` times the largest rule coefficient.
    """
    if B is not None and B != F.basis:
        raise ValueError("basis does not match the family")
    worst = 0.0
    for c in cplus_polynomials(F, t):
        r = F.normal_form(c)
        worst = max(worst, r.max_abs_coeff())
    return worst <= tol * max(1.0, F.max_coefficient()), worst


# ---------------------------------------------------------------------------
# completion


class _Grid:
    """Dense coordinates for all monomials of degree <= D."""

    def __init__(self, n: int, D: int):
        self.n = n
        self.D = D
        self.monos = monomials_up_to(n, D)
        self.index = {m: j for j, m in enumerate(self.monos)}
        self.deg = np.array([sum(m) for m in self.monos])
        self.shift = []
        for i in range(n):
            src, dst = [], []
            for j, m in enumerate(self.monos):
                if sum(m) < D:
                    src.append(j)
                    dst.append(self.index[_mul_var(m, i)])
            self.shift.append((np.array(src, dtype=int), np.array(dst, dtype=int)))

    def vector(self, p: Polynomial) -> np.ndarray:
        v = np.zeros(len(self.monos))
        for m, c in p.items():
            v[self.index[m]] = c
        return v


_UNIT = np.finfo(float).eps
#: singular values must exceed this multiple of the tracked noise level
NOISE_FACTOR = 1e3


def _graded_echelon(R: np.ndarray, err: np.ndarray, deg: np.ndarray, D: int, eps: float):
    """Orthogonal, degree-blocked row echelon form with noise tracking.

    Returns ``(rows, rdeg, rerr)``: a basis of the row space of ``R`` where row
    ``k`` is supported on columns of degree <= ``rdeg[k]`` and has a
    non-trivial degree ``rdeg[k]`` part.  ``err`` holds an absolute error
    estimate per input row (rows are unit-normalised first); it is carried
    through the rotations and rescaled when a row is renormalised, so that a
    singular value counts only if it exceeds both ``eps`` and
    ``NOISE_FACTOR`` times the noise of the rows it came from.
    """
    rows, rdeg, rerr = [], [], []
    nrm = np.linalg.norm(R, axis=1)
    rem = R / nrm[:, None]
    e = err / nrm + _UNIT
    for d in range(D, -1, -1):
        keep = np.linalg.norm(rem, axis=1) > np.maximum(eps, NOISE_FACTOR * e)
        rem, e = rem[keep], e[keep]
        if rem.shape[0] == 0:
            break
        blk = deg == d
        U, s, _ = np.linalg.svd(rem[:, blk], full_matrices=True)
        rot = U.T @ rem
        e = np.sqrt((U.T ** 2) @ (e ** 2)) + _UNIT
        noise = float(np.max(e))
        # the block's singular values are not renormalised: noise is measured against the input scale
        r = int(np.sum(s > max(eps, NOISE_FACTOR * noise)))
        if r:
            piv = rot[:r]
            piv[:, deg > d] = 0.0
            pn = np.linalg.norm(piv, axis=1)
            rows.append(piv / pn[:, None])
            rdeg.extend([d] * r)
            rerr.extend(e[:r] / pn)
        rem = rot[r:]
        # the discarded degree-d residue is noise, and so is anything of that size below it
        dropped = np.zeros(rem.shape[0])
        tail = s[r:]
        dropped[: tail.size] = tail
        e = np.maximum(e[r:], dropped)
        rem[:, deg >= d] = 0.0
    if rows:
        return np.vstack(rows), np.array(rdeg, dtype=int), np.array(rerr)
    return np.zeros((0, R.shape[1])), np.zeros(0, dtype=int), np.zeros(0)


def stable_span(generators: Sequence[Polynomial], D: int, eps: float = 1e-9, grid: _Grid | None = None):
    """Smallest space containing ``generators`` and closed under ``x_i *`` in degree <= D."""
    n = generators[0].nvars
    grid = grid or _Grid(n, D)
    R = np.array([grid.vector(g) for g in generators if not g.is_zero()])
    if R.size == 0:
        return grid, np.zeros((0, len(grid.monos))), np.zeros(0, dtype=int)
    # coefficients are taken as exact up to rounding
    err = _UNIT * np.linalg.norm(R, axis=1)
    rank = -1
    for _ in range(4 * D + 8):
        E, edeg, eerr = _graded_echelon(R, err, grid.deg, D, eps)
        if E.shape[0] == rank:
            break
        rank = E.shape[0]
        lowmask = edeg < D
        low, lowerr = E[lowmask], eerr[lowmask]
        parts, perr = [E], [eerr]
        for src, dst in grid.shift:
            S = np.zeros_like(low)
            S[:, dst] = low[:, src]
            parts.append(S)
            perr.append(lowerr)
        R = np.vstack(parts)
        err = np.concatenate(perr)
    else:
        raise BorderBasisError("stable span did not converge")
    return grid, E, edeg


def _rational(c: float):
    # shortest decimal that round-trips, so 0.1 enters as 1/10
    return QQ(*Fraction(repr(float(c))).as_integer_ratio())


def exact_stable_span(generators: Sequence[Polynomial], D: int, grid: _Grid | None = None,
                      as_float: bool = True):
    """Same space as :func:`stable_span`, computed in exact rational arithmetic.

    Coefficients are read as the shortest decimals that round-trip.  With
    ``as_float`` the result has the layout of :func:`stable_span` (rows
    grouped by degree, orthonormal top-degree parts); otherwise the reduced
    echelon rows are returned as an object array of rationals.
    """
    n = generators[0].nvars
    grid = grid or _Grid(n, D)
    ncol = len(grid.monos)
    # descending graded order: an RREF pivot is then the row's leading monomial
    order = sorted(range(ncol), key=lambda j: grlex_key(grid.monos[j]), reverse=True)
    pos = {j: k for k, j in enumerate(order)}
    cdeg = [int(grid.deg[j]) for j in order]
    zero = QQ(0)
    rows = []
    for g in generators:
        if g.is_zero():
            continue
        r = [zero] * ncol
        for m, c in g.items():
            r[pos[grid.index[m]]] = _rational(c)
        rows.append(r)
    shift = []
    for i in range(n):
        src, dst = grid.shift[i]
        shift.append({pos[a]: pos[b] for a, b in zip(src, dst)})
    rank = -1
    while True:
        R, piv = DomainMatrix(rows, (len(rows), ncol), QQ).rref()
        if len(piv) == rank:
            break
        rank = len(piv)
        ech = R.to_list()[:rank]
        rows = list(ech)
        for r, p in zip(ech, piv):
            if cdeg[p] < D:
                for mp in shift:
                    new = [zero] * ncol
                    for k, c in enumerate(r):
                        if c:
                            new[mp[k]] = c
                    rows.append(new)
    rdeg = np.array([cdeg[p] for p in piv], dtype=int)
    if not as_float:
        E = np.full((rank, ncol), zero, dtype=object)
        for k, r in enumerate(ech):
            E[k, order] = r
        return grid, E, rdeg
    if rank == 0:
        return grid, np.zeros((0, ncol)), rdeg
    A = np.zeros((rank, ncol))
    for k, r in enumerate(ech):
        A[k, order] = [float(c) for c in r]
    blocks, bdeg = [], []
    for d in sorted(set(rdeg.tolist()), reverse=True):
        Ad = A[rdeg == d]
        U, sv, _ = np.linalg.svd(Ad[:, grid.deg == d], full_matrices=False)
        Ad = (U.T @ Ad) / sv[:, None]
        blocks.append(Ad / np.linalg.norm(Ad, axis=1, keepdims=True))
        bdeg.extend([d] * Ad.shape[0])
    return grid, np.vstack(blocks), np.array(bdeg, dtype=int)


def _exact_solve(A: np.ndarray, Bm: np.ndarray) -> np.ndarray:
    """``A^{-1} Bm`` over the rationals, rounded to floats."""
    k, m = A.shape[0], Bm.shape[1]
    M = DomainMatrix(np.hstack([A, Bm]).tolist(), (k, k + m), QQ)
    R, piv = M.rref()
    if tuple(piv) != tuple(range(k)):
        raise BorderBasisError("singular pivot block")
    return np.array([[float(c) for c in row[k:]] for row in R.to_list()]).reshape(k, m)


def complete_in_degree(generators: Sequence[Polynomial], t: int, eps_pivot: float = 1e-9,
                       exact: bool = False) -> Tuple[RewritingFamily, MonomialBasis]:
    """Border basis in degree <= ``t`` of the ideal spanned by ``generators``.

    The space of relations is closed under multiplication by variables up to
    degree ``t`` (this is the fixed point of adding reduced C+ polynomials),
    then leading monomials are chosen degree by degree: monomials no longer
    connected to the basis must be leading, the rest are picked by largest
    absolute coefficient among choosable monomials.

    With ``exact=True`` the closure is computed over the rationals (see
    :func:`exact_stable_span`); use it for generators whose coefficients are
    exact, not for numerically estimated ones.
    """
    gens = [g for g in generators if not g.is_zero()]
    if not gens:
        raise ValueError("at least one non-zero generator is required")
    n = gens[0].nvars
    top = max(g.degree for g in gens)
    if top > t:
        raise ValueError(f"generator of degree {top} exceeds completion degree {t}")
    if exact:
        grid, E, edeg = exact_stable_span(gens, t, as_float=False)
        eps_pivot = 0
    else:
        grid, E, edeg = stable_span(gens, t, eps_pivot)
    if np.any(edeg == 0):
        raise UnitIdealError()

    basis_set = set()
    pivot_cols: List[int] = []
    kept_rows: List[int] = []
    for d in range(t + 1):
        cols = [j for j in np.flatnonzero(grid.deg == d)]
        # descending grlex so that argmax ties resolve to the grlex-largest monomial
        cols.sort(key=lambda j: grlex_key(grid.monos[j]), reverse=True)
        ridx = np.flatnonzero(edeg == d)
        if d == 0:
            basis_set.add(grid.monos[cols[0]])
            continue
        T = E[np.ix_(ridx, cols)].copy()
        connected = np.array([
            any(m[i] > 0 and _div_var(m, i) in basis_set for i in range(n))
            for m in (grid.monos[j] for j in cols)
        ])
        free_rows = list(range(len(ridx)))
        chosen = np.zeros(len(cols), dtype=bool)

        def take(r, c):
            piv = T[r, c]
            for r2 in free_rows:
                if r2 != r:
                    T[r2] -= (T[r2, c] / piv) * T[r]
            free_rows.remove(r)
            chosen[c] = True
            pivot_cols.append(cols[c])
            kept_rows.append(ridx[r])

        for c in np.flatnonzero(~connected):
            if not free_rows:
                raise BorderBasisError(f"no relation left to cover disconnected monomial {grid.monos[cols[c]]}")
            r = max(free_rows, key=lambda rr: abs(T[rr, c]))
            if abs(T[r, c]) <= eps_pivot:
                raise BorderBasisError(f"numerical breakdown covering monomial {grid.monos[cols[c]]}")
            take(r, c)
        while free_rows:
            cand = np.flatnonzero(connected & ~chosen)
            if cand.size == 0:
                break
            sub = np.abs(T[np.ix_(free_rows, cand)])
            k = int(np.argmax(sub))
            ri, ci = divmod(k, cand.size)
            rowmax = np.max(np.abs(T[free_rows[ri]]))
            if sub[ri, ci] <= eps_pivot * max(rowmax, 1.0):
                # remaining rows are numerically zero on choosable monomials
                break
            take(free_rows[ri], cand[ci])
        for c in range(len(cols)):
            if not chosen[c]:
                basis_set.add(grid.monos[cols[c]])

    B = MonomialBasis(basis_set, n)
    Rm = E[kept_rows]
    P = np.array(pivot_cols, dtype=int)
    bcols = np.array([grid.index[b] for b in B], dtype=int)
    if exact:
        coef = _exact_solve(Rm[:, P], Rm[:, bcols])
    else:
        coef = np.linalg.solve(Rm[:, P], Rm[:, bcols])
    pos = {grid.monos[j]: k for k, j in enumerate(P)}
    bdeg = np.array([sum(b) for b in B])
    rules = {}
    for g in B.border():
        if sum(g) > t:
            continue
        row = coef[pos[g]]
        mask = bdeg <= sum(g)
        tail = {b: -row[j] for j, b in enumerate(B) if mask[j] and row[j] != 0.0}
        scale = max((abs(v) for v in tail.values()), default=0.0)
        tail = {b: v for b, v in tail.items() if abs(v) > 1e-13 * max(1.0, scale)}
        rules[g] = Polynomial(tail, n)
    F = RewritingFamily(rules, B)
    log.debug("completion in degree %d: |B|=%d, %d rules", t, len(B), len(F))
    return F, B
