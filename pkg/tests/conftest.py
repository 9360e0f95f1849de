import itertools

import numpy as np
import pytest
from scipy.optimize import minimize as sp_minimize

from polymin.parser import parse_polynomial

XY = ["x", "y"]

MOTZKIN = "1 + x^4*y^2 + x^2*y^4 - 3*x^2*y^2"
ROBINSON = "1 + x^6 - x^4 - x^2 + y^6 - y^4 - y^2 - x^4*y^2 - x^2*y^4 + 3*x^2*y^2"
CUBIC = "-12*x^3 + 3*x*y^2 + 4*y^3 - 16*x^2*y + 48*x^2 - 12*y^2"
LEEP_STARR = ("16 + x^2*y^4 + 2*x^2*y^3 - 4*x^3*y^3 + 4*x*y^2 + 20*x^2*y^2"
              " + 8*x^3*y^2 + 6*x^4*y^2 + 8*x*y - 16*x^2*y")

ROBINSON_POINTS = [(1, 1), (1, -1), (-1, 1), (-1, -1), (1, 0), (-1, 0), (0, 1), (0, -1)]
MOTZKIN_POINTS = [(1, 1), (1, -1), (-1, 1), (-1, -1)]


def poly(text, variables=XY):
    return parse_polynomial(text, variables)


@pytest.fixture(scope="session")
def motzkin():
    return poly(MOTZKIN)


@pytest.fixture(scope="session")
def robinson():
    return poly(ROBINSON)


@pytest.fixture(scope="session")
def cubic():
    return poly(CUBIC)


@pytest.fixture(scope="session")
def leep_starr():
    return poly(LEEP_STARR)


# -- independent oracles --------------------------------------------------


def to_arrays(p):
    """Exponent matrix and coefficients for vectorised evaluation."""
    E = np.array([m for m, _ in p.items()], dtype=float)
    c = np.array([v for _, v in p.items()])
    return E, c


def vec_eval(E, c, Z):
    # Z: (k, n) points
    return np.prod(Z[:, None, :] ** E[None, :, :], axis=2) @ c


def multistart_min(p, box=10.0, grid=50, polish=25):
    """Minimum by multistart BFGS from the best points of a grid over ``[-box, box]^n``."""
    n = p.nvars
    E, c = to_arrays(p)
    axes = [np.linspace(-box, box, grid)] * n
    Z = np.array(list(itertools.product(*axes)))
    vals = vec_eval(E, c, Z)
    best = np.inf
    arg = None
    for k in np.argsort(vals)[:polish]:
        r = sp_minimize(lambda z: float(vec_eval(E, c, z[None, :])[0]), Z[k], method="BFGS",
                        options={"gtol": 1e-10})
        if r.fun < best:
            best, arg = float(r.fun), r.x
    return best, arg


def common_roots_of_line_products(A, B):
    """Intersections of the line families ``A`` and ``B`` (rows ``a0 + a1 x + a2 y``)."""
    pts = []
    for a in A:
        for b in B:
            M = np.array([[a[1], a[2]], [b[1], b[2]]])
            pts.append(np.linalg.solve(M, -np.array([a[0], b[0]])))
    return pts
