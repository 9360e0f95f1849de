import os
import subprocess
import sys

import numpy as np
import pytest

from polymin import kernels

pytestmark = pytest.mark.skipif(not kernels.HAVE_NUMBA, reason="numba not installed")


@pytest.fixture
def restore_backend():
    old = kernels.backend()
    yield
    kernels.set_backend(old)


def _random_stack(rng, n=6, m=5, density=0.3):
    mats = []
    for _ in range(m):
        A = rng.normal(size=(n, n)) * (rng.random((n, n)) < density)
        mats.append(A + A.T)
    return np.array(mats), kernels.SparseStack.from_dense(mats)


def _both(fn, *args):
    kernels.set_backend("numba")
    a = fn(*args)
    kernels.set_backend("numpy")
    b = fn(*args)
    return a, b


@pytest.mark.parametrize("seed", range(5))
def test_backends_agree(seed, restore_backend):
    rng = np.random.default_rng(seed)
    D, S = _random_stack(rng)
    G = rng.normal(size=(6, 6))
    W = G @ G.T
    Z = rng.normal(size=(6, 6))
    y = rng.normal(size=5)
    for fn, args in [(kernels.congruence, (G, S)), (kernels.schur_complement, (W, S)),
                     (kernels.apply_adjoint, (Z, S)), (kernels.combine, (y, S))]:
        a, b = _both(fn, *args)
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("backend", ["numba", "numpy"])
def test_kernels_against_dense_formulas(backend, restore_backend):
    kernels.set_backend(backend)
    rng = np.random.default_rng(11)
    D, S = _random_stack(rng)
    G = rng.normal(size=(6, 6))
    W = G @ G.T
    A = kernels.congruence(G, S)
    M = kernels.schur_complement(W, S)
    want = np.array([[np.trace(Fi @ W @ Fj @ W) for Fj in D] for Fi in D])
    assert np.allclose(M, want)
    assert np.allclose(A.T @ A, want)
    Z = rng.normal(size=(6, 6))
    assert np.allclose(kernels.apply_adjoint(Z, S), [np.sum(Fi * Z) for Fi in D])
    y = rng.normal(size=5)
    assert np.allclose(kernels.combine(y, S), np.tensordot(y, D, 1))


def test_svec_round_trip():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(4, 4))
    X = X + X.T
    v = kernels.svec(X)
    assert np.allclose(kernels.smat(v, 4), X)
    assert v @ v == pytest.approx(np.sum(X * X))


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.set_backend("cuda")


@pytest.mark.parametrize("flag, want", [("1", "numpy"), ("0", "numba"), ("", "numba")])
def test_environment_flag(flag, want):
    env = dict(os.environ, POLYMIN_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from polymin import kernels; print(kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == want
