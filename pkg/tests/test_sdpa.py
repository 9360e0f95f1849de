import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polymin import kernels
from polymin.border import complete_in_degree
from polymin.poly import MonomialBasis, gradient
from polymin.sdp import StandardSDP, assemble, solve, to_standard_form
from polymin.sdpa import SDPAFormatError, dumps_sdpa, export_sdpa, import_sdpa, loads_sdpa

from conftest import poly

TOY = assemble(poly("x^2 - 2*x", ["x"]), MonomialBasis([(0,), (1,)]))


def _same(P, Q):
    assert P.m == Q.m and P.n == Q.n
    assert np.array_equal(P.c, Q.c) and P.c0 == Q.c0
    assert np.array_equal(P.F0, Q.F0)
    assert np.array_equal(P.F.dense(), Q.F.dense())


def test_toy_layout():
    text = dumps_sdpa(TOY)
    lines = [l for l in text.splitlines() if not l.startswith(('"', "*"))]
    assert lines[0] == "2"  # lambda_x and lambda_x2; lambda_0 = 1 sits in F0
    assert lines[1] == "1"
    assert lines[2] == "2"
    mats = {int(l.split()[0]) for l in lines[4:]}
    assert mats == {0, 1, 2}
    # SDPA stores -F0, so the fixed (1,1) entry appears as -1
    assert "0 1 1 1 -1" in lines


def test_round_trip(tmp_path):
    path = tmp_path / "toy.dat-s"
    export_sdpa(TOY, path)
    _same(to_standard_form(TOY), import_sdpa(path))


def test_round_trip_solves_the_same(motzkin, tmp_path):
    F, B = complete_in_degree(gradient(motzkin), 8, exact=True)
    sdp = assemble(motzkin, B.truncate(4), F)
    P = to_standard_form(sdp)
    Q = loads_sdpa(dumps_sdpa(P))
    _same(P, Q)
    # entry order differs after a round trip, so only summation order changes
    assert solve(Q).primal_objective == pytest.approx(solve(P).primal_objective, abs=1e-8)


def test_zero_blocks_rejected():
    with pytest.raises(SDPAFormatError, match="nblocks") as exc:
        loads_sdpa("1\n0\n2\n1.0\n")
    assert exc.value.line == 2


@pytest.mark.parametrize("text, line", [
    ("1\n1\n2\n1.0\n1 1 3 3 1.0\n", 5),
    ("1\n1\n2\n1.0\n2 1 1 1 1.0\n", 5),
    ("1\n1\n2\n1.0\n1 1 1 1\n", 5),
    ("1\n1\n2\nabc\n", 4),
    ("1\n1\n-2\n1.0\n1 1 1 2 1.0\n", 5),
    ("1\n1\n", 3),
])
def test_malformed(text, line):
    with pytest.raises(SDPAFormatError) as exc:
        loads_sdpa(text)
    assert exc.value.line == line


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        import_sdpa(tmp_path / "nope.dat-s")


def test_sdpa_punctuation_is_accepted():
    P = loads_sdpa('"c"\n2 = mDIM\n1 = nBLOCK\n(2) = bLOCKsTRUCT\n{1.0, 2.0}\n1 1 1 1 1.0\n2 1 1 2 1.0\n')
    assert P.m == 2 and P.n == 2


floats = st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: v != 0.0)


@settings(max_examples=60)
@given(st.integers(1, 4), st.integers(1, 3), st.data())
def test_random_round_trip(n, m, data):
    F0 = np.zeros((n, n))
    mats = np.zeros((m, n, n))
    for A in [F0] + list(mats):
        for i in range(n):
            for j in range(i, n):
                if data.draw(st.booleans()):
                    A[i, j] = A[j, i] = data.draw(floats)
    c = np.array([data.draw(floats) for _ in range(m)])
    P = StandardSDP(c=c, c0=data.draw(floats), F0=F0, F=kernels.SparseStack.from_dense(mats))
    _same(P, loads_sdpa(dumps_sdpa(P)))
