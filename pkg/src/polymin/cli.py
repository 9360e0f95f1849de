"""Command-line front end.

Problem files are line oriented::

    # Motzkin polynomial
    vars: x, y
    minimize: 1 + x^4*y^2 + x^2*y^4 - 3*x^2*y^2
    option t_max = 8

Exit codes: 0 success, 2 bad input, 3 ``t_max`` exceeded, 4 numerical
failure, 5 ``check`` found a mismatch.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .minimizer import (
    MinimizerOptions,
    MinimizerResult,
    NumericalFailure,
    TMaxExceeded,
    lower_bound_at_degree,
    minimize,
)
from .parser import ParseError, format_monomial, format_polynomial, parse_polynomial
from .poly import Polynomial, gradient
from .roots import RootExtractionError
from .sdp import SDPError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TMAX = 3
EXIT_NUMERICAL = 4
EXIT_MISMATCH = 5

_OPTION_TYPES = {
    "t_max": int,
    "seed": int,
    "max_iter": int,
    "tol_rank": float,
    "tol_gap": float,
    "tol_min": float,
    "eps_pivot": float,
    "eps_kernel": float,
}

# tolerances used by ``check``
CHECK_VALUE = 1e-4
CHECK_GRADIENT = 1e-4
CHECK_RULES = 1e-4


class ProblemError(ValueError):
    """Malformed problem file; ``line`` is 1-based or 0 when not tied to a line."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if line else (f"{path}: " if path else "")
        super().__init__(where + message)


@dataclass
class ProblemFile:
    variables: List[str]
    objective_text: str
    objective: Polynomial
    options: Dict[str, float] = field(default_factory=dict)
    path: str = ""


def parse_problem(text: str, path: str = "") -> ProblemFile:
    variables: Optional[List[str]] = None
    objective = None
    options: Dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("vars:"):
            if variables is not None:
                raise ProblemError("duplicate 'vars:' line", path, lineno)
            variables = [v.strip() for v in line[5:].split(",") if v.strip()]
            if not variables:
                raise ProblemError("'vars:' lists no variables", path, lineno)
        elif line.startswith("minimize:"):
            if variables is None:
                raise ProblemError("'vars:' must precede 'minimize:'", path, lineno)
            if objective is not None:
                raise ProblemError("duplicate 'minimize:' line", path, lineno)
            body = line[9:].strip()
            try:
                objective = (body, parse_polynomial(body, variables))
            except ParseError as exc:
                raise ProblemError(f"objective: {exc}", path, lineno) from exc
        elif line.startswith("option"):
            rest = line[6:].strip()
            if "=" not in rest:
                raise ProblemError("expected 'option <name> = <value>'", path, lineno)
            name, value = (s.strip() for s in rest.split("=", 1))
            if name not in _OPTION_TYPES:
                raise ProblemError(f"unknown option {name!r}", path, lineno)
            try:
                options[name] = _OPTION_TYPES[name](value)
            except ValueError:
                raise ProblemError(f"bad value for option {name}: {value!r}", path, lineno) from None
        else:
            raise ProblemError(f"unrecognised line {line!r}", path, lineno)
    if variables is None:
        raise ProblemError("missing 'vars:' line", path)
    if objective is None:
        raise ProblemError("missing 'minimize:' line", path)
    return ProblemFile(variables, objective[0], objective[1], options, path)


def load_problem(path: str) -> ProblemFile:
    if not os.path.isfile(path):
        raise ProblemError("problem file not found", path)
    with open(path) as fh:
        return parse_problem(fh.read(), path)


def _options(problem: ProblemFile, args) -> MinimizerOptions:
    opts = MinimizerOptions()
    for k, v in problem.options.items():
        setattr(opts, k, v)
    for k in ("t_max", "seed", "tol_rank", "tol_gap", "tol_min"):
        v = getattr(args, k, None)
        if v is not None:
            setattr(opts, k, v)
    if getattr(args, "dump_sdpa", None):
        opts.dump_sdpa = args.dump_sdpa
    return opts


def _num(x) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None


def _trace(records) -> List[dict]:
    return [
        {
            "t": r.t,
            "stage": r.stage,
            "hankel_size": r.hankel_size,
            "objective": _num(r.objective),
            "gap_flag": r.gap_flag,
            "status": r.status,
            "kernel_dim": r.kernel_dim,
            "wall_ms": round(r.wall_ms, 3),
        }
        for r in records
    ]


def result_document(problem: ProblemFile, res: MinimizerResult, opts: MinimizerOptions) -> dict:
    v = problem.variables
    return {
        "problem": problem.path,
        "variables": v,
        "objective": problem.objective_text,
        "status": "ok",
        "minimum": _num(res.minimum),
        "quotient_basis": [format_monomial(b, v) for b in res.quotient_basis],
        "border_basis": [format_polynomial(p, v) for p in res.border_basis.polynomials()],
        "points": [[float(x) for x in z] for z in res.points],
        "certificates": [c.as_dict() for c in res.certificates],
        "flat_extension": bool(res.flat_extension),
        "trace": _trace(res.trace),
        "options": {"t_max": opts.t_max, "seed": opts.seed, "tol_rank": opts.tol_rank,
                    "tol_gap": opts.tol_gap, "tol_min": opts.tol_min},
    }


def _failure_document(problem: ProblemFile, status: str, message: str, trace, best=None) -> dict:
    doc = {
        "problem": problem.path,
        "variables": problem.variables,
        "objective": problem.objective_text,
        "status": status,
        "message": message,
    }
    if best is not None:
        doc["lower_bound"] = _num(best)
    doc["trace"] = _trace(trace)
    return doc


def _emit(doc: dict, args, human) -> None:
    text = json.dumps(doc, indent=2)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    if args.json:
        print(text)
    else:
        human(doc)


def _print_result(doc: dict) -> None:
    if doc["status"] != "ok":
        print(f"status: {doc['status']}")
        print(doc["message"])
        if "lower_bound" in doc:
            print(f"best lower bound: {doc['lower_bound']}")
    else:
        print(f"minimum: {doc['minimum']:.10g}")
        print("quotient basis: {" + ", ".join(doc["quotient_basis"]) + "}")
        print("border basis:")
        for g in doc["border_basis"]:
            print(f"  {g}")
        print(f"points ({len(doc['points'])}):")
        for z in doc["points"]:
            print("  (" + ", ".join(f"{x:.8g}" for x in z) + ")")
    print("trace:")
    for r in doc["trace"]:
        obj = "nan" if r["objective"] is None else f"{r['objective']:.8g}"
        print(f"  t={r['t']} {r['stage']:<7} size={r['hankel_size']:<3} obj={obj:<16} "
              f"gap={r['gap_flag']!s:<5} kernel={r['kernel_dim']}")


def cmd_minimize(args) -> int:
    problem = load_problem(args.file)
    opts = _options(problem, args)
    try:
        res = minimize(problem.objective, opts)
    except TMaxExceeded as exc:
        _emit(_failure_document(problem, "t_max_exceeded", str(exc), exc.trace, exc.best_bound),
              args, _print_result)
        return EXIT_TMAX
    except NumericalFailure as exc:
        _emit(_failure_document(problem, "numerical_failure", str(exc), exc.trace), args, _print_result)
        return EXIT_NUMERICAL
    except (SDPError, RootExtractionError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    _emit(result_document(problem, res, opts), args, _print_result)
    return EXIT_OK


def cmd_bound(args) -> int:
    problem = load_problem(args.file)
    opts = _options(problem, args)
    try:
        b = lower_bound_at_degree(problem.objective, args.degree, opts)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SDPError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    doc = {
        "problem": problem.path,
        "degree": args.degree,
        "lower_bound": _num(b.value),
        "gap_flag": b.gap_flag,
        "status": b.status,
        "hankel_size": b.hankel_size,
    }
    _emit(doc, args, lambda d: print(f"t={d['degree']} size={d['hankel_size']} bound={d['lower_bound']} "
                                     f"gap={d['gap_flag']} status={d['status']}"))
    return EXIT_OK


def check_document(doc: dict, problem: ProblemFile) -> List[str]:
    """Re-evaluate a result document against its problem; returns the failed checks."""
    fails: List[str] = []
    if doc.get("status") != "ok":
        return [f"document status is {doc.get('status')!r}"]
    f = problem.objective
    grad = gradient(f)
    v = problem.variables
    if doc.get("variables") != v:
        fails.append("variables differ from the problem file")
        return fails
    try:
        gens = [parse_polynomial(g, v) for g in doc["border_basis"]]
    except ParseError as exc:
        return [f"border basis does not parse: {exc}"]
    fmin = doc["minimum"]
    scale = 1.0 + abs(fmin)
    if not doc["points"]:
        fails.append("no points")
    for k, z in enumerate(doc["points"]):
        z = np.asarray(z, dtype=float)
        val = f(z)
        if abs(val - fmin) > CHECK_VALUE * scale:
            fails.append(f"point {k}: f = {val:.10g} differs from minimum {fmin:.10g}")
        gn = max(abs(d(z)) for d in grad)
        if gn > CHECK_GRADIENT * scale:
            fails.append(f"point {k}: gradient norm {gn:.3g}")
        rr = max((abs(g(z)) for g in gens), default=0.0)
        if rr > CHECK_RULES * max(1.0, max(g.max_abs_coeff() for g in gens) if gens else 1.0):
            fails.append(f"point {k}: border-basis residual {rr:.3g}")
        if k < len(doc.get("certificates", [])):
            c = doc["certificates"][k]
            if abs(c["value"] - val) > CHECK_VALUE * scale:
                fails.append(f"point {k}: certificate value {c['value']:.10g} does not match f = {val:.10g}")
    # every bound without a gap must sit below the minimum
    for r in doc.get("trace", []):
        if not r["gap_flag"] and r["objective"] is not None and r["objective"] > fmin + CHECK_VALUE * scale:
            fails.append(f"trace t={r['t']} {r['stage']}: bound {r['objective']:.10g} exceeds minimum")
    return fails


def _resolve_problem(ref: str, doc_path: str) -> str:
    if os.path.isabs(ref) or os.path.exists(ref):
        return ref
    return os.path.join(os.path.dirname(os.path.abspath(doc_path)), ref)


def cmd_check(args) -> int:
    if not os.path.isfile(args.result):
        print(f"error: result document not found: {args.result}", file=sys.stderr)
        return EXIT_INPUT
    try:
        with open(args.result) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        print(f"error: {args.result}: not a result document ({exc})", file=sys.stderr)
        return EXIT_INPUT
    ref = doc.get("problem")
    if not ref:
        print("error: result document names no problem file", file=sys.stderr)
        return EXIT_INPUT
    problem = load_problem(_resolve_problem(ref, args.result))
    fails = check_document(doc, problem)
    if fails:
        for msg in fails:
            print(f"FAIL {msg}")
        return EXIT_MISMATCH
    print(f"ok: {len(doc['points'])} points certified, minimum {doc['minimum']:.10g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polymin", description="global minimisation of real polynomials")
    ap.add_argument("-v", "--verbose", action="store_true", help="log every relaxation")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", help="problem file")
        p.add_argument("--t-max", dest="t_max", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--tol-rank", dest="tol_rank", type=float)
        p.add_argument("--tol-gap", dest="tol_gap", type=float)
        p.add_argument("--tol-min", dest="tol_min", type=float)
        p.add_argument("--dump-sdpa", dest="dump_sdpa", metavar="DIR", help="write every SDP to DIR")
        p.add_argument("--json", action="store_true", help="print the JSON document")
        p.add_argument("--out", help="write the JSON document to this path")

    p = sub.add_parser("minimize", help="compute the minimum, minimiser ideal and minimisers")
    common(p)
    p.set_defaults(func=cmd_minimize)
    p = sub.add_parser("bound", help="lower bound from a single relaxation")
    common(p)
    p.add_argument("--degree", type=int, required=True, help="relaxation degree t")
    p.set_defaults(func=cmd_bound)
    p = sub.add_parser("check", help="re-verify a result document")
    p.add_argument("result")
    p.set_defaults(func=cmd_check)
    return ap


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
