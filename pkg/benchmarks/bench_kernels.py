"""Compare the numba and numpy kernels of the interior-point solver.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 50]

Times the per-iteration kernels (congruence, adjoint, combine, Schur) on the
moment problems of the four test polynomials, then whole solves and whole
minimisations with each backend.  Results from the two backends are compared
so that a speed-up never hides a wrong answer.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from polymin import kernels
from polymin.border import complete_in_degree
from polymin.minimizer import minimize
from polymin.parser import parse_polynomial
from polymin.poly import gradient
from polymin.sdp import assemble, solve, to_standard_form

PROBLEMS = {
    "motzkin": "1 + x^4*y^2 + x^2*y^4 - 3*x^2*y^2",
    "robinson": "1 + x^6 - x^4 - x^2 + y^6 - y^4 - y^2 - x^4*y^2 - x^2*y^4 + 3*x^2*y^2",
    "cubic": "-12*x^3 + 3*x*y^2 + 4*y^3 - 16*x^2*y + 48*x^2 - 12*y^2",
    "leep_starr": "16 + x^2*y^4 + 2*x^2*y^3 - 4*x^3*y^3 + 4*x*y^2 + 20*x^2*y^2 + 8*x^3*y^2"
                  " + 6*x^4*y^2 + 8*x*y - 16*x^2*y",
}


def best_of(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def standard_problem(text, t):
    f = parse_polynomial(text, ["x", "y"])
    F, B = complete_in_degree(gradient(f), 2 * t, exact=True)
    return to_standard_form(assemble(f, B.truncate(t), F))


def bench_kernels(repeat):
    print(f"{'problem':<30}{'kernel':<12}{'numpy us':>10}{'numba us':>10}{'ratio':>8}")
    rng = np.random.default_rng(0)
    for name, t in (("motzkin", 5), ("robinson", 5), ("motzkin", 7)):
        P = standard_problem(PROBLEMS[name], t)
        n = P.n
        X = rng.normal(size=(n, n))
        W = X @ X.T
        y = rng.normal(size=P.m)
        cases = {
            "congruence": lambda: kernels.congruence(X, P.F),
            "adjoint": lambda: kernels.apply_adjoint(W, P.F),
            "combine": lambda: kernels.combine(y, P.F),
            "schur": lambda: kernels.schur_complement(W, P.F),
        }
        for kname, fn in cases.items():
            res = {}
            for b in ("numpy", "numba"):
                kernels.set_backend(b)
                fn()  # compile / warm up
                res[b] = best_of(fn, repeat)
            err = np.max(np.abs(res["numpy"][1] - res["numba"][1]))
            assert err <= 1e-9 * max(1.0, np.max(np.abs(res["numpy"][1]))), (kname, err)
            a, b = res["numpy"][0] * 1e6, res["numba"][0] * 1e6
            label = f"{name} t={t} (n={n},m={P.m})"
            print(f"{label:<30}{kname:<12}{a:>10.1f}{b:>10.1f}{a / b:>8.2f}")


def bench_solves(repeat):
    print(f"\n{'end to end':<30}{'numpy ms':>10}{'numba ms':>10}{'ratio':>8}")
    for name, t in (("motzkin", 5), ("robinson", 5)):
        f = parse_polynomial(PROBLEMS[name], ["x", "y"])
        F, B = complete_in_degree(gradient(f), 2 * t, exact=True)
        sdp = assemble(f, B.truncate(t), F)
        res = {}
        for b in ("numpy", "numba"):
            kernels.set_backend(b)
            solve(sdp)
            res[b] = best_of(lambda: solve(sdp), max(1, repeat // 10))
        assert abs(res["numpy"][1].primal_objective - res["numba"][1].primal_objective) < 1e-8
        a, b = res["numpy"][0] * 1e3, res["numba"][0] * 1e3
        print(f"{'solve ' + name + ' t=' + str(t):<30}{a:>10.1f}{b:>10.1f}{a / b:>8.2f}")
    for name in PROBLEMS:
        f = parse_polynomial(PROBLEMS[name], ["x", "y"])
        res = {}
        for b in ("numpy", "numba"):
            kernels.set_backend(b)
            res[b] = best_of(lambda: minimize(f), 1)
        assert abs(res["numpy"][1].minimum - res["numba"][1].minimum) < 1e-6
        a, b = res["numpy"][0] * 1e3, res["numba"][0] * 1e3
        print(f"{'minimize ' + name:<30}{a:>10.1f}{b:>10.1f}{a / b:>8.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=50)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    bench_kernels(args.repeat)
    bench_solves(args.repeat)


if __name__ == "__main__":
    main()
