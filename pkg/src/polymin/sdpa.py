"""Reader and writer for the SDPA sparse format (``.dat-s``).

SDPA states the primal as ``min c'x  s.t.  sum_i x_i F_i - F_0 >= 0``, so the
constant matrix is written with the opposite sign of :class:`StandardSDP`.
The objective offset, which SDPA has no field for, travels in a comment line
``* offset <value>``.
"""
from __future__ import annotations

import os
import re
from typing import List, Tuple

import numpy as np

from . import kernels
from .sdp import MomentSDP, StandardSDP, to_standard_form

_SPLIT = re.compile(r"[\s,{}()]+")


class SDPAFormatError(ValueError):
    def __init__(self, message: str, line: int, field: int = 1):
        self.line = line
        self.field = field
        super().__init__(f"line {line}, field {field}: {message}")


def _num(x: float) -> str:
    return "%.17g" % x


def _upper(A: np.ndarray, offset: int = 0) -> List[Tuple[int, int, float]]:
    out = []
    n = A.shape[0]
    for i in range(n):
        for j in range(i, n):
            if A[i, j] != 0.0:
                out.append((i + 1 + offset, j + 1 + offset, float(A[i, j])))
    return out


def dumps_sdpa(P: StandardSDP | MomentSDP) -> str:
    if isinstance(P, MomentSDP):
        P = to_standard_form(P)
    blocks = P.blocks or (P.n,)
    if sum(blocks) != P.n:
        raise ValueError("block structure does not match the matrix size")
    lines = ['"polymin moment relaxation"', f"* offset {_num(P.c0)}"]
    lines.append(str(P.m))
    lines.append(str(len(blocks)))
    lines.append(" ".join(str(b) for b in blocks))
    lines.append(" ".join(_num(v) for v in P.c) if P.m else "")
    mats = [-P.F0] + [P.F.matrix(k) for k in range(P.m)]
    for k, A in enumerate(mats):
        off = 0
        for b, size in enumerate(blocks):
            sub = A[off:off + size, off:off + size]
            for i, j, v in _upper(sub):
                lines.append(f"{k} {b + 1} {i} {j} {_num(v)}")
            off += size
    return "\n".join(lines) + "\n"


def export_sdpa(P: StandardSDP | MomentSDP, path) -> None:
    """Write ``P`` to ``path`` in SDPA sparse format with 17 significant digits."""
    with open(path, "w") as fh:
        fh.write(dumps_sdpa(P))


def loads_sdpa(text: str) -> StandardSDP:
    c0 = 0.0
    header: List[Tuple[int, List[str]]] = []
    entries: List[Tuple[int, List[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if s.startswith("*"):
            m = re.match(r"\*\s*offset\s+(\S+)", s)
            if m:
                try:
                    c0 = float(m.group(1))
                except ValueError:
                    raise SDPAFormatError("bad offset value", lineno, 3) from None
            continue
        if s.startswith('"') and not header:
            continue
        toks = [t for t in _SPLIT.split(s) if t]
        if not toks:
            continue
        # with m == 0 the objective line is empty and therefore skipped
        need = 4 if not header or _int(header[0], 0) > 0 else 3
        if len(header) < need:
            header.append((lineno, toks))
        else:
            entries.append((lineno, toks))
    if len(header) < 3:
        raise SDPAFormatError("truncated header", len(text.splitlines()) + 1)
    m = _int(header[0], 0)
    nb = _int(header[1], 0)
    if nb <= 0:
        raise SDPAFormatError("nblocks must be positive", header[1][0])
    bl = header[2]
    if len(bl[1]) < nb:
        raise SDPAFormatError(f"expected {nb} block sizes", bl[0])
    blocks = tuple(_int(bl, k) for k in range(nb))
    if any(b == 0 for b in blocks):
        raise SDPAFormatError("block size must be non-zero", bl[0])
    sizes = [abs(b) for b in blocks]
    n = sum(sizes)
    starts = np.concatenate([[0], np.cumsum(sizes)])
    if m:
        if len(header) < 4 or len(header[3][1]) < m:
            raise SDPAFormatError(f"expected {m} objective coefficients", header[3][0] if len(header) > 3 else bl[0])
        c = np.array([_float(header[3], k) for k in range(m)])
    else:
        c = np.zeros(0)
    mats = np.zeros((m + 1, n, n))
    for lineno, toks in entries:
        if len(toks) != 5:
            raise SDPAFormatError(f"expected 5 fields, found {len(toks)}", lineno)
        k, b, i, j = (_int((lineno, toks), q) for q in range(4))
        v = _float((lineno, toks), 4)
        if not 0 <= k <= m:
            raise SDPAFormatError(f"matrix number {k} out of range", lineno)
        if not 1 <= b <= nb:
            raise SDPAFormatError(f"block number {b} out of range", lineno)
        size = sizes[b - 1]
        if not (1 <= i <= size and 1 <= j <= size):
            raise SDPAFormatError(f"index ({i}, {j}) outside block of size {size}", lineno)
        if blocks[b - 1] < 0 and i != j:
            raise SDPAFormatError("off-diagonal entry in a diagonal block", lineno)
        r, s = starts[b - 1] + i - 1, starts[b - 1] + j - 1
        mats[k, r, s] = v
        mats[k, s, r] = v
    F = kernels.SparseStack.from_dense(mats[1:]) if m else kernels.SparseStack(n, [0], [], [], [])
    return StandardSDP(c=c, c0=c0, F0=-mats[0], F=F, blocks=tuple(sizes))


def import_sdpa(path) -> StandardSDP:
    """Read an SDPA sparse file; malformed content raises :class:`SDPAFormatError`."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        return loads_sdpa(fh.read())


def _int(rec, k) -> int:
    lineno, toks = rec
    try:
        v = float(toks[k])
    except (IndexError, ValueError):
        raise SDPAFormatError("expected an integer", lineno, k + 1) from None
    if v != int(v):
        raise SDPAFormatError("expected an integer", lineno, k + 1)
    return int(v)


def _float(rec, k) -> float:
    lineno, toks = rec
    try:
        return float(toks[k])
    except (IndexError, ValueError):
        raise SDPAFormatError("expected a number", lineno, k + 1) from None
