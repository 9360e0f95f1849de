import numpy as np
import pytest

from polymin.border import complete_in_degree
from polymin.moment import build_hankel, check_positive, numerical_rank
from polymin.poly import MonomialBasis, Polynomial, gradient
from polymin.sdp import (
    RepresentationError,
    SolverOptions,
    Status,
    assemble,
    solve,
    to_standard_form,
)

from conftest import poly

B1 = MonomialBasis([(0,), (1,)])


def test_assemble_toy():
    sdp = assemble(poly("x^2 - 2*x", ["x"]), B1)
    assert sdp.variables == ((0,), (1,), (2,))
    assert sdp.objective == {(2,): 1.0, (1,): -2.0}
    assert sdp.equality_constraints == []
    assert sdp.size == 2


def test_assemble_rejects_objective_outside_span():
    with pytest.raises(RepresentationError, match="increase the degree"):
        assemble(poly("x^4", ["x"]), B1)


def test_assemble_keeps_only_supported_generators():
    B = MonomialBasis.up_to_degree(2, 1)
    sdp = assemble(poly("x^2 + y^2"), B, [poly("x*y - 1"), poly("x^3 - 1")])
    assert sdp.equality_constraints == [{(1, 1): 1.0, (0, 0): -1.0}]


@pytest.mark.parametrize("t, size", [(3, 10), (5, 19)])
def test_motzkin_relaxation_sizes(motzkin, t, size):
    F, B = complete_in_degree(gradient(motzkin), 2 * t, exact=True)
    sdp = assemble(motzkin, B.truncate(t), F)
    assert sdp.size == size


def test_solve_square():
    sol = solve(assemble(poly("x^2", ["x"]), B1))
    assert sol.status is Status.OPTIMAL
    assert sol.primal_objective == pytest.approx(0.0, abs=1e-7)
    assert sol.moments[(1,)] == pytest.approx(0.0, abs=1e-4)
    assert sol.moments[(2,)] == pytest.approx(0.0, abs=1e-7)


def test_solve_toy():
    sol = solve(assemble(poly("x^2 - 2*x", ["x"]), B1))
    assert sol.status is Status.OPTIMAL
    assert sol.primal_objective == pytest.approx(-1.0, abs=1e-7)
    assert sol.dual_objective == pytest.approx(-1.0, abs=1e-7)
    assert sol.moments[(1,)] == pytest.approx(1.0, abs=1e-4)
    assert sol.moments[(2,)] == pytest.approx(1.0, abs=1e-4)
    for k in ("primal", "dual"):
        assert sol.residuals[k] <= 1e-8


def test_motzkin_low_degree_has_gap(motzkin):
    F, B = complete_in_degree(gradient(motzkin), 6, exact=True)
    sol = solve(assemble(motzkin, B.truncate(3), F))
    assert sol.gap_flag
    assert sol.primal_objective < -100


def test_unbounded_problem():
    # nothing ties lambda_x to lambda_x2 beyond PSD, and the objective pushes lambda_x down
    sol = solve(assemble(poly("x", ["x"]), B1))
    assert sol.status is Status.UNBOUNDED


def test_infeasible_problem():
    sdp = assemble(poly("x^2", ["x"]), B1, [poly("x^2 + 1", ["x"])])
    assert solve(sdp).status is Status.INFEASIBLE


# -- random moment problems ----------------------------------------------------


def random_problem(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 3))
    t = int(rng.integers(1, 3))
    B = MonomialBasis.up_to_degree(n, t)
    monos = list(B)
    # sum of squares plus a linear tilt keeps the problem bounded
    f = Polynomial.zero(n)
    for _ in range(len(monos)):
        q = Polynomial({m: float(rng.normal()) for m in monos}, n)
        f = f + q * q
    lin = Polynomial({m: float(rng.normal()) for m in monos}, n)
    f = f + lin
    gens = []
    if rng.random() < 0.5:
        gens.append(Polynomial({m: float(rng.normal()) for m in monos[1:]}, n))
    return f, B, gens


@pytest.mark.parametrize("seed", range(50))
def test_weak_duality(seed):
    f, B, gens = random_problem(seed)
    sol = solve(assemble(f, B, gens))
    assert sol.status is Status.OPTIMAL
    p, d = sol.primal_objective, sol.dual_objective
    assert d <= p + 1e-7 * (1 + abs(p))
    for rec in sol.history:
        if rec["rel_p"] <= 1e-10 and rec["rel_d"] <= 1e-10:
            assert rec["dobj"] <= rec["pobj"] + 1e-7 * (1 + abs(rec["pobj"]))
    # Slater holds for these problems, so the gap closes
    assert abs(p - d) <= 1e-6 * (1 + abs(p))
    ok, _ = check_positive(sol.H, 1e-7)
    assert ok


def _cvxpy_value(f, B):
    cp = pytest.importorskip("cvxpy")
    prods = B.products()
    lam = {m: cp.Variable() for m in prods}
    k = len(B)
    H = cp.bmat([[lam[tuple(a + b for a, b in zip(p, q))] for q in B] for p in B])
    cons = [lam[(0,) * B.nvars] == 1, (H + H.T) / 2 >> 0]
    obj = cp.Minimize(sum(c * lam[m] for m, c in f.items()))
    prob = cp.Problem(obj, cons)
    prob.solve(solver="CLARABEL")
    assert k == H.shape[0]
    return prob.value


@pytest.mark.parametrize("seed", range(8))
def test_matches_reference_solver(seed):
    f, B, _ = random_problem(1000 + seed)
    want = _cvxpy_value(f, B)
    sol = solve(assemble(f, B))
    assert sol.primal_objective == pytest.approx(want, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("c", [0.5, 3.0, 40.0])
def test_objective_scaling(c):
    # moments of a rank-deficient optimum converge like sqrt(gap), so solve tightly
    opts = SolverOptions(tol_feas=1e-12, tol_comp=1e-12)
    f, B, gens = random_problem(7)
    a = solve(assemble(f, B, gens), opts)
    b = solve(assemble(f.scale(c), B, gens), opts)
    assert b.primal_objective == pytest.approx(c * a.primal_objective, rel=1e-6, abs=1e-7)
    for m in a.moments.values:
        assert b.moments[m] == pytest.approx(a.moments[m], abs=1e-6)


def test_interior_solution_has_maximal_rank(motzkin):
    # the central path ends in the relative interior of the optimal face; tilting
    # the objective picks a face point that can only have lower rank
    F, B = complete_in_degree(gradient(motzkin), 8, exact=True)
    Bt = B.truncate(4)
    sol = solve(assemble(motzkin, Bt, F))
    r0 = numerical_rank(build_hankel(sol.moments, Bt.truncate(3)).matrix, 1e-6)
    rng = np.random.default_rng(3)
    for _ in range(3):
        tilt = Polynomial({m: 1e-4 * float(rng.normal()) for m in Bt.truncate(2).products()}, 2)
        tilted = solve(assemble(motzkin + tilt, Bt, F))
        r = numerical_rank(build_hankel(tilted.moments, Bt.truncate(3)).matrix, 1e-6)
        assert r0 >= r


def test_standard_form_eliminates_normalisation():
    P = to_standard_form(assemble(poly("x^2 - 2*x", ["x"]), B1))
    assert P.m == 2 and P.n == 2
    assert P.F0[0, 0] == 1.0
