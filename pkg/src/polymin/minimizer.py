"""Global minimisation through the gradient ideal and moment relaxations.

The loop raises the relaxation degree ``t`` until two consecutive bounded
relaxations agree, harvests polynomials of the minimiser ideal from the kernel
of the moment matrix, and stops once the relaxation on the reduced quotient
basis has the same value and a full-rank moment matrix.
"""
from __future__ import annotations

import logging
import math
import os
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .border import BorderBasisError, RewritingFamily, complete_in_degree
from .moment import MomentVector, build_hankel, flat_extension_test, kernel
from .poly import MonomialBasis, Polynomial, gradient
from .roots import Certificate, build_multiplication_matrices, certify, extract_points
from .sdp import MomentSDP, SolverOptions, SDPSolution, Status, assemble, solve

log = logging.getLogger(__name__)


class MinimizerError(RuntimeError):
    pass


class TMaxExceeded(MinimizerError):
    """Raised when no certificate was found up to ``t_max``.

    ``best_bound`` is the largest relaxation value without a duality gap and
    remains a valid lower bound for the minimum.
    """

    def __init__(self, t_max: int, trace: List["IterationRecord"], best_bound: float):
        self.t_max = t_max
        self.trace = trace
        self.best_bound = best_bound
        super().__init__(f"no flat extension found up to t_max={t_max}; best lower bound {best_bound:.10g}")


class NumericalFailure(MinimizerError):
    def __init__(self, message: str, t: int, trace: List["IterationRecord"]):
        self.t = t
        self.trace = trace
        super().__init__(f"{message} (at t={t})")


@dataclass
class MinimizerOptions:
    t_max: int = 12
    tol_rank: float = 1e-7
    tol_gap: float = 1e-4
    tol_min: float = 1e-6
    eps_pivot: float = 1e-9
    # pivot threshold once numerically harvested kernel polynomials join the generators
    eps_kernel: float = 1e-4
    seed: int = 0
    # gradient closures over the rationals; input coefficients are exact decimals
    exact: bool = True
    dump_sdpa: Optional[str] = None
    max_iter: int = 200

    def solver_options(self) -> SolverOptions:
        return SolverOptions(max_iter=self.max_iter, tol_gap=self.tol_gap)

    def same(self, a: float, b: float) -> bool:
        return abs(a - b) <= self.tol_min * (1.0 + abs(a))


@dataclass
class IterationRecord:
    """One relaxation solve: ``stage`` is ``"relax"`` on ``B_t`` or ``"reduced"`` on ``B'``."""

    t: int
    stage: str
    hankel_size: int
    objective: float
    gap_flag: bool
    status: str
    kernel_dim: Optional[int] = None
    basis_size: Optional[int] = None
    wall_ms: float = 0.0
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "stage": self.stage,
            "hankel_size": self.hankel_size,
            "objective": self.objective,
            "gap_flag": self.gap_flag,
            "status": self.status,
            "kernel_dim": self.kernel_dim,
            "basis_size": self.basis_size,
            "wall_ms": self.wall_ms,
            "note": self.note,
        }


@dataclass
class LoopState:
    t: int
    F: Optional[RewritingFamily] = None
    B: Optional[MonomialBasis] = None
    f_tilde: float = -math.inf
    history: List[IterationRecord] = field(default_factory=list)


@dataclass
class MinimizerResult:
    minimum: float
    quotient_basis: MonomialBasis
    border_basis: RewritingFamily
    points: List[np.ndarray]
    certificates: List[Certificate]
    trace: List[IterationRecord]
    moments: Optional[MomentVector] = None
    flat_extension: bool = False


@dataclass
class Bound:
    value: float
    gap_flag: bool
    status: str
    hankel_size: int


def _check_objective(f: Polynomial) -> List[Polynomial]:
    if f.degree < 1:
        raise ValueError("objective must be non-constant")
    return gradient(f)


def _solve(f, B, F, opts: MinimizerOptions, tag: str) -> SDPSolution:
    sdp = assemble(f, B, F)
    if opts.dump_sdpa:
        from .sdpa import export_sdpa

        os.makedirs(opts.dump_sdpa, exist_ok=True)
        export_sdpa(sdp, os.path.join(opts.dump_sdpa, f"{tag}.dat-s"))
    return solve(sdp, opts.solver_options())


def _relaxation(f: Polynomial, grad: List[Polynomial], t: int, opts: MinimizerOptions):
    F, B = complete_in_degree(grad, 2 * t, opts.eps_pivot, exact=opts.exact)
    Bt = B.truncate(t)
    sol = _solve(f, Bt, F, opts, f"t{t}_relax")
    return F, B, Bt, sol


def lower_bound_at_degree(f: Polynomial, t: int, opts: MinimizerOptions | None = None) -> Bound:
    """Value of the gradient-ideal moment relaxation of degree ``t``.

    The value is a lower bound on the minimum whenever ``gap_flag`` is false.
    """
    opts = opts or MinimizerOptions()
    grad = _check_objective(f)
    if t < math.ceil(f.degree / 2):
        raise ValueError(f"t must be at least ceil(deg f / 2) = {math.ceil(f.degree / 2)}")
    _, _, Bt, sol = _relaxation(f, grad, t, opts)
    return Bound(sol.primal_objective, sol.status is not Status.OPTIMAL, sol.status.value, len(Bt))


def _extend_moments(lam: MomentVector, F: RewritingFamily, B: MonomialBasis) -> MomentVector:
    # moments on B+ * B+ obtained through the normal form
    Bp = B.prolong()
    vals: Dict = {}
    for m in Bp.products():
        vals[m] = lam.apply(F.normal_form(Polynomial.monomial(m)))
    return MomentVector(vals, lam.nvars)


def minimize(f: Polynomial, opts: MinimizerOptions | None = None) -> MinimizerResult:
    """Global minimum, minimiser-ideal border basis and minimisers of ``f``.

    Parameters
    ----------
    f : Polynomial
        Non-constant polynomial that attains its infimum at finitely many
        real points.
    opts : MinimizerOptions, optional

    Raises
    ------
    TMaxExceeded
        When no certificate is found up to ``opts.t_max``.
    """
    opts = opts or MinimizerOptions()
    grad = _check_objective(f)
    state = LoopState(t=math.ceil(f.degree / 2))
    best = -math.inf

    def record(**kw) -> IterationRecord:
        r = IterationRecord(**kw)
        state.history.append(r)
        log.info("t=%d %s size=%d obj=%.10g status=%s", r.t, r.stage, r.hankel_size, r.objective, r.status)
        return r

    while state.t <= opts.t_max:
        t = state.t
        t0 = time.perf_counter()
        try:
            F, B, Bt, sol = _relaxation(f, grad, t, opts)
        except BorderBasisError as exc:
            raise NumericalFailure(f"border basis completion failed: {exc}", t, state.history) from exc
        state.F, state.B = F, B
        ms = (time.perf_counter() - t0) * 1e3
        obj = sol.primal_objective
        gap = sol.status is not Status.OPTIMAL
        rec = record(t=t, stage="relax", hankel_size=len(Bt), objective=obj, gap_flag=gap,
                     status=sol.status.value, basis_size=len(B), wall_ms=ms)
        if gap:
            state.t += 1
            continue
        best = max(best, obj)
        if not opts.same(obj, state.f_tilde):
            state.f_tilde = obj
            state.t += 1
            continue

        # harvest the kernel of the moment matrix one degree lower
        t0 = time.perf_counter()
        Bt1 = B.truncate(t - 1)
        ker = kernel(build_hankel(sol.moments, Bt1), opts.tol_rank)
        rec.kernel_dim = len(ker)
        ker = [F.normal_form(k) for k in ker]
        ker = [k for k in ker if not k.is_zero()]
        D = 2 * (t - 1)
        gens = list(grad) + [p for p in F.polynomials() if p.degree <= D] + ker
        try:
            F2, B2 = complete_in_degree(gens, D, opts.eps_kernel)
        except BorderBasisError as exc:
            rec.note = f"reduction failed: {exc}"
            state.t += 1
            continue
        if any(sum(b) >= t - 1 for b in B2):
            rec.note = f"reduced basis of size {len(B2)} reaches degree {t - 1}"
            state.t += 1
            continue

        sol2 = _solve(f, B2, F2, opts, f"t{t}_reduced")
        obj2 = sol2.primal_objective
        gap2 = sol2.status is not Status.OPTIMAL
        ker2 = [] if gap2 else kernel(build_hankel(sol2.moments, B2), opts.tol_rank)
        ms = (time.perf_counter() - t0) * 1e3
        record(t=t, stage="reduced", hankel_size=len(B2), objective=obj2, gap_flag=gap2,
               status=sol2.status.value, kernel_dim=len(ker2), basis_size=len(B2), wall_ms=ms)
        if gap2 or not opts.same(obj2, state.f_tilde) or ker2:
            state.t += 1
            continue

        lam = _extend_moments(sol2.moments, F2, B2)
        flat = flat_extension_test(lam, B2, opts.tol_rank)
        points = extract_points(build_multiplication_matrices(F2, B2), seed=opts.seed)
        return MinimizerResult(
            minimum=obj2,
            quotient_basis=B2,
            border_basis=F2,
            points=points,
            certificates=certify(points, f, F2),
            trace=state.history,
            moments=sol2.moments,
            flat_extension=flat,
        )
    raise TMaxExceeded(opts.t_max, state.history, best)
