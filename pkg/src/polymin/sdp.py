"""Moment relaxations and a dense primal-dual interior-point SDP solver.

The moment problem is solved in linear-matrix-inequality form::

    minimise    c'u + c0
    subject to  H(u) = F0 + sum_i u_i F_i  >= 0

whose dual is the sums-of-squares side::

    maximise    c0 - <F0, Z>
    subject to  <F_i, Z> = c_i,   Z >= 0.

Free variables ``u`` parametrise the moments left after eliminating the
normalisation ``lambda_0 = 1`` and the linear constraints ``Lambda(g) = 0``.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla

from . import kernels
from .border import RewritingFamily
from .moment import MomentVector
from .poly import Monomial, MonomialBasis, Polynomial, grlex_key, mono_mul, mono_one

log = logging.getLogger(__name__)


class SDPError(RuntimeError):
    pass


class RepresentationError(SDPError):
    """The objective cannot be written on the moments of the relaxation."""


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    GAP = "GapDetected"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


@dataclass
class MomentSDP:
    """Optimal-linear-form problem on a monomial basis.

    ``variables`` are the moments ``lambda_alpha``; the Hankel entry ``(a, b)``
    is the variable ``a+b``.  ``lambda_0 = 1`` is implied.
    """

    basis: MonomialBasis
    variables: Tuple[Monomial, ...]
    objective: Dict[Monomial, float]
    equality_constraints: List[Dict[Monomial, float]] = field(default_factory=list)

    @property
    def nvars(self) -> int:
        return self.basis.nvars

    @property
    def size(self) -> int:
        return len(self.basis)


@dataclass
class StandardSDP:
    """``min c'u + c0  s.t.  F0 + sum u_i F_i >= 0`` with a lift back to moments."""

    c: np.ndarray
    c0: float
    F0: np.ndarray
    F: kernels.SparseStack
    lift_offset: Optional[np.ndarray] = None
    lift_matrix: Optional[np.ndarray] = None
    variables: Tuple[Monomial, ...] = ()
    blocks: Tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.F0.shape[0]

    @property
    def m(self) -> int:
        return len(self.c)

    def hankel(self, u) -> np.ndarray:
        return self.F0 + kernels.combine(np.asarray(u, float), self.F)


@dataclass
class SolverOptions:
    max_iter: int = 200
    tol_feas: float = 1e-8
    tol_comp: float = 1e-8
    tol_gap: float = 1e-4
    tol_psd: float = 1e-7
    step: float = 0.98
    bound: float = 1e8


@dataclass
class SDPSolution:
    status: Status
    primal_objective: float
    dual_objective: float
    iterations: int
    u: np.ndarray
    H: np.ndarray
    Z: np.ndarray
    moments: Optional[MomentVector] = None
    residuals: Dict[str, float] = field(default_factory=dict)
    history: List[Dict[str, float]] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return self.primal_objective - self.dual_objective

    @property
    def gap_flag(self) -> bool:
        return self.status is not Status.OPTIMAL


# ---------------------------------------------------------------------------
# assembly


def assemble(f: Polynomial, B_t: MonomialBasis, F: RewritingFamily | Sequence[Polynomial] | None = None
             ) -> MomentSDP:
    """Optimal-linear-form problem for ``f`` on ``B_t``.

    With a rewriting family, every product ``b = a*a'`` outside the family's
    basis contributes ``b - pi(b)``; the moments of ``pi(b)``'s support join
    the variables.  With a plain list of generators, only those supported on
    ``B_t * B_t`` are imposed.
    """
    one = mono_one(B_t.nvars)
    if one not in B_t:
        raise ValueError("basis must contain 1")
    prods = B_t.products()
    variables = set(prods)
    cons: List[Dict[Monomial, float]] = []
    if isinstance(F, RewritingFamily):
        for b in prods:
            if b in F.basis:
                continue
            nf = F._nf_monomial(b)
            g = {b: 1.0}
            for m, c in nf.items():
                g[m] = g.get(m, 0.0) - c
                variables.add(m)
            cons.append(g)
    elif F is not None:
        pset = set(prods)
        for g in F:
            if g.is_zero():
                continue
            if all(m in pset for m in g.terms):
                cons.append(dict(g.terms))
    obj = f
    if not all(m in variables for m in f.terms):
        if isinstance(F, RewritingFamily):
            try:
                obj = F.normal_form(f)
            except Exception as exc:
                raise RepresentationError(
                    f"objective cannot be reduced on the basis ({exc}); increase the degree") from exc
        bad = [m for m in obj.terms if m not in variables]
        if bad:
            raise RepresentationError(
                f"objective monomials {bad[:3]} are outside the relaxation; increase the degree")
    return MomentSDP(B_t, tuple(sorted(variables, key=grlex_key)), dict(obj.terms), cons)


def _eliminate(A: np.ndarray, b: np.ndarray, order: Sequence[int], tol: float = 1e-12):
    """Solve ``A x = b`` as ``x = x0 + N y`` by pivoted Gauss-Jordan elimination.

    Columns are tried in ``order``; the first usable column becomes the pivot,
    so dependent variables are the ones listed early.
    """
    A = A.astype(float).copy()
    b = b.astype(float).copy()
    k, v = A.shape
    scale = np.maximum(np.max(np.abs(A), axis=1, initial=0.0), 1e-300)
    pivots: List[Tuple[int, int]] = []
    r = 0
    for col in order:
        if r == k:
            break
        i = r + int(np.argmax(np.abs(A[r:, col])))
        if abs(A[i, col]) <= tol * scale[i]:
            continue
        if i != r:
            A[[r, i]] = A[[i, r]]
            b[[r, i]] = b[[i, r]]
            scale[[r, i]] = scale[[i, r]]
        piv = A[r, col]
        A[r] /= piv
        b[r] /= piv
        for j in range(k):
            if j != r and A[j, col] != 0.0:
                fct = A[j, col]
                A[j] -= fct * A[r]
                b[j] -= fct * b[r]
        pivots.append((r, col))
        r += 1
    for i in range(r, k):
        if abs(b[i]) > 1e-9 * max(1.0, np.max(np.abs(b))):
            raise SDPError("moment constraints are inconsistent")
    pcols = [c for _, c in pivots]
    free = [c for c in range(v) if c not in set(pcols)]
    x0 = np.zeros(v)
    N = np.zeros((v, len(free)))
    for j, c in enumerate(free):
        N[c, j] = 1.0
    for row, c in pivots:
        x0[c] = b[row]
        N[c, :] = -A[row, free]
    N[np.abs(N) < 1e-15] = 0.0
    return x0, N


def to_standard_form(sdp: MomentSDP) -> StandardSDP:
    variables = list(sdp.variables)
    vidx = {m: i for i, m in enumerate(variables)}
    one = mono_one(sdp.nvars)
    rows = [{one: 1.0}] + list(sdp.equality_constraints)
    rhs = np.zeros(len(rows))
    rhs[0] = 1.0
    A = np.zeros((len(rows), len(variables)))
    for r, g in enumerate(rows):
        for m, c in g.items():
            A[r, vidx[m]] += c
    in_basis = set(sdp.basis.products())
    # eliminate moments that are not products first, then the constant
    order = sorted(range(len(variables)),
                   key=lambda j: (variables[j] in in_basis, variables[j] != one, grlex_key(variables[j])))
    reducible = {m for g in sdp.equality_constraints for m in g}
    order = sorted(order, key=lambda j: 0 if (variables[j] not in in_basis) else
                   (1 if variables[j] == one else (2 if variables[j] in reducible else 3)))
    x0, N = _eliminate(A, rhs, order)

    monos = sdp.basis.monomials
    n = len(monos)
    positions: Dict[Monomial, List[Tuple[int, int]]] = {}
    for i in range(n):
        for j in range(n):
            positions.setdefault(mono_mul(monos[i], monos[j]), []).append((i, j))
    F0 = np.zeros((n, n))
    mats = [dict() for _ in range(N.shape[1])]
    for m, pos in positions.items():
        a = vidx[m]
        for (i, j) in pos:
            F0[i, j] += x0[a]
        for k in np.flatnonzero(N[a]):
            d = mats[k]
            for (i, j) in pos:
                d[(i, j)] = d.get((i, j), 0.0) + N[a, k]
    ptr, row, col, val = [0], [], [], []
    for d in mats:
        for (i, j), v in d.items():
            if v != 0.0:
                row.append(i)
                col.append(j)
                val.append(v)
        ptr.append(len(row))
    fvec = np.zeros(len(variables))
    for m, c in sdp.objective.items():
        fvec[vidx[m]] += c
    return StandardSDP(
        c=N.T @ fvec,
        c0=float(fvec @ x0),
        F0=F0,
        F=kernels.SparseStack(n, ptr, row, col, val),
        lift_offset=x0,
        lift_matrix=N,
        variables=tuple(variables),
        blocks=(n,),
    )


# ---------------------------------------------------------------------------
# interior point


def _chol(X: np.ndarray) -> Optional[np.ndarray]:
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return None


def _max_step(X: np.ndarray, dX: np.ndarray, L: np.ndarray) -> float:
    Li = sla.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    w = np.linalg.eigvalsh(Li @ dX @ Li.T)
    lo = w[0]
    return math.inf if lo >= 0 else -1.0 / lo


def _newton(Q: np.ndarray, R1: np.ndarray, A: np.ndarray, b: np.ndarray, rp: np.ndarray):
    """Solve ``s + A du = b, A's = rp`` from a thin QR of ``A``.

    This is the augmented form of the Schur system ``A'A du = A'b - rp``; the
    scaled dual step ``s`` is recovered without squaring the conditioning.
    """
    d = np.abs(np.diag(R1))
    if d.size and d.min() > 1e-14 * d.max():
        w = sla.solve_triangular(R1, rp, trans="T", check_finite=False)
        du = sla.solve_triangular(R1, Q.T @ b - w, check_finite=False)
    else:
        # rank-deficient constraint matrices: minimum-norm least squares
        du = np.linalg.lstsq(A.T @ A, A.T @ b - rp, rcond=1e-14)[0]
        w = np.linalg.lstsq(R1.T, rp, rcond=1e-14)[0]
    s = Q @ w + (b - Q @ (Q.T @ b))
    return du, s


def solve_standard(P: StandardSDP, opts: SolverOptions | None = None) -> SDPSolution:
    """Mehrotra predictor-corrector with Nesterov-Todd scaling, infeasible start."""
    opts = opts or SolverOptions()
    n, m = P.n, P.m
    c, F0, F = P.c, P.F0, P.F
    if m == 0:
        ok = np.linalg.eigvalsh(F0)[0] >= -opts.tol_psd * max(1.0, np.abs(F0).max()) if n else True
        st = Status.OPTIMAL if ok else Status.INFEASIBLE
        return SDPSolution(st, P.c0, P.c0, 0, np.zeros(0), F0.copy(), np.zeros_like(F0),
                           residuals={"primal": 0.0, "dual": 0.0, "gap": 0.0})

    normF = np.sqrt(np.array([np.sum(F.val[F.ptr[i]:F.ptr[i + 1]] ** 2) for i in range(m)]))
    normF0 = np.linalg.norm(F0)
    normc = np.linalg.norm(c)
    xiZ = max(10.0, math.sqrt(n), n * float(np.max((1.0 + np.abs(c)) / (1.0 + normF))))
    xiH = max(10.0, math.sqrt(n), float(np.max(normF, initial=0.0)), normF0)
    u = np.zeros(m)
    H = xiH * np.eye(n)
    Z = xiZ * np.eye(n)
    I = np.eye(n)

    history: List[Dict[str, float]] = []
    status = Status.ITERATION_LIMIT
    best = None
    stall = 0
    it = 0
    for it in range(1, opts.max_iter + 1):
        Hu = P.hankel(u)
        rp = c - kernels.apply_adjoint(Z, F)
        rd = Hu - H
        gap = float(np.sum(H * Z))
        mu = gap / n
        pobj = float(c @ u) + P.c0
        dobj = P.c0 - float(np.sum(F0 * Z))
        rel_p = np.linalg.norm(rd) / (1.0 + normF0)
        rel_d = np.linalg.norm(rp) / (1.0 + normc)
        rel_gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        rel_comp = gap / (1.0 + abs(pobj) + abs(dobj))
        rec = dict(iter=it, pobj=pobj, dobj=dobj, rel_p=rel_p, rel_d=rel_d, gap=gap, mu=mu)
        history.append(rec)
        if max(rel_p, rel_d) <= opts.tol_feas and max(rel_gap, rel_comp) <= opts.tol_comp:
            status = Status.OPTIMAL
            break
        if rel_p <= 1e-6 and rel_d <= 1e-6:
            if best is None or max(rel_gap, rel_comp) < best[0]:
                best = (max(rel_gap, rel_comp), u.copy(), H.copy(), Z.copy())
        hn = np.linalg.norm(H)
        zn = np.linalg.norm(Z)
        if hn > opts.bound * (1.0 + xiH) and rel_p <= 1e-6:
            status = Status.UNBOUNDED
            break
        if zn > opts.bound * (1.0 + xiZ) and rel_d <= 1e-6:
            status = Status.INFEASIBLE
            break

        LZ = _chol(Z)
        LH = _chol(H)
        if LZ is None or LH is None:
            status = Status.GAP
            break
        _, s, Vt = np.linalg.svd(LH.T @ LZ)
        # NT scaling: G' H G = G^-1 Z G^-T = diag(s)
        G = LZ @ Vt.T / np.sqrt(s)
        A = kernels.congruence(G, F)
        try:
            Q, R1 = sla.qr(A, mode="economic", check_finite=False)
        except (ValueError, sla.LinAlgError):
            status = Status.GAP
            break
        rdt = G.T @ rd @ G

        def direction(Dt):
            du, st = _newton(Q, R1, A, kernels.svec(Dt - rdt), rp)
            dH = kernels.combine(du, F) + rd
            dZt = kernels.smat(st, n)
            dZ = G @ dZt @ G.T
            return du, (dH + dH.T) / 2, (dZ + dZ.T) / 2, dZt

        ssum = s[:, None] + s[None, :]
        # predictor
        du, dH, dZ, dZt = direction(-np.diag(s))
        ap = min(1.0, opts.step * _max_step(H, dH, LH))
        ad = min(1.0, opts.step * _max_step(Z, dZ, LZ))
        gap_a = float(np.sum((H + ap * dH) * (Z + ad * dZ)))
        sigma = min(1.0, max(0.0, gap_a / gap)) ** 3 if gap > 0 else 0.0
        # corrector
        dHt = G.T @ dH @ G
        Rc = 2 * sigma * mu * I - 2 * np.diag(s ** 2) - (dZt @ dHt + dHt @ dZt)
        du, dH, dZ, _ = direction(Rc / ssum)
        ap = min(1.0, opts.step * _max_step(H, dH, LH))
        ad = min(1.0, opts.step * _max_step(Z, dZ, LZ))
        u = u + ap * du
        H = H + ap * dH
        Z = Z + ad * dZ
        if max(ap, ad) < 1e-6:
            stall += 1
            if stall >= 3:
                status = Status.GAP
                break
        else:
            stall = 0
    else:
        status = Status.ITERATION_LIMIT

    if status is not Status.OPTIMAL and best is not None and status in (Status.GAP, Status.ITERATION_LIMIT):
        _, u, H, Z = best
    Hu = P.hankel(u)
    pobj = float(c @ u) + P.c0
    dobj = P.c0 - float(np.sum(F0 * Z))
    rel_p = float(np.linalg.norm(Hu - H) / (1.0 + normF0))
    rel_d = float(np.linalg.norm(c - kernels.apply_adjoint(Z, F)) / (1.0 + normc))
    if status in (Status.GAP, Status.ITERATION_LIMIT):
        # a stalled run that is feasible and within the gap tolerance counts as solved
        if max(rel_p, rel_d) <= 1e-6 and abs(pobj - dobj) <= opts.tol_gap * (1.0 + abs(pobj)):
            status = Status.OPTIMAL
        elif max(rel_p, rel_d) <= 1e-6:
            status = Status.GAP
    res = {"primal": rel_p, "dual": rel_d, "gap": abs(pobj - dobj), "complementarity": float(np.sum(H * Z))}
    return SDPSolution(status, pobj, dobj, it, u, Hu, Z, residuals=res, history=history)


def lift(P: StandardSDP, u: np.ndarray) -> Dict[Monomial, float]:
    lam = P.lift_offset + P.lift_matrix @ u
    return {m: float(v) for m, v in zip(P.variables, lam)}


def solve(sdp: MomentSDP | StandardSDP, opts: SolverOptions | None = None) -> SDPSolution:
    """Solve a moment problem; the returned moments cover ``sdp.variables``."""
    if isinstance(sdp, StandardSDP):
        return solve_standard(sdp, opts)
    P = to_standard_form(sdp)
    sol = solve_standard(P, opts)
    sol.moments = MomentVector(lift(P, sol.u), sdp.nvars)
    return sol
