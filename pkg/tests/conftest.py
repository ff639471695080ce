import math
import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from hybridid.mop import MOP, Piece, make_region
from hybridid.polynomial import Polynomial

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "hybridid" / "fixtures"
INVALID = Path(__file__).resolve().parent / "invalid"

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def entrepreneur():
    from hybridid.model import load_diagram
    return load_diagram(FIXTURES / "entrepreneur.yaml")


@pytest.fixture(scope="session")
def put_option():
    from hybridid.model import load_diagram
    return load_diagram(FIXTURES / "put_option.yaml")


@pytest.fixture(scope="session")
def entrepreneur_strategy(entrepreneur):
    from hybridid.solver import solve
    return solve(entrepreneur)


@pytest.fixture(scope="session")
def put_strategy(put_option):
    from hybridid.solver import solve
    return solve(put_option)


def _breaks(draw, lo, hi, n):
    pts = draw(st.lists(st.integers(1, 15), min_size=n - 1, max_size=n - 1, unique=True))
    inner = sorted(lo + (hi - lo) * p / 16 for p in pts)
    return [lo] + inner + [hi]


@st.composite
def mops(draw, scope=("x",), lo=-2.0, hi=2.0, max_cells=3, max_degree=3, density=False):
    """Random MOPs on a grid of boxes over ``[lo, hi)`` per variable."""
    scope = tuple(sorted(scope))
    grids = [_breaks(draw, lo, hi, draw(st.integers(1, max_cells))) for _ in scope]
    cells = list(itertools.product(*[list(zip(g[:-1], g[1:])) for g in grids]))
    keep = draw(st.lists(st.booleans(), min_size=len(cells), max_size=len(cells)))
    coef = st.floats(-3, 3, allow_nan=False, allow_infinity=False)
    if density:
        coef = st.floats(0.05, 3, allow_nan=False, allow_infinity=False)
    pieces = []
    for cell, k in zip(cells, keep):
        if not (k or density):
            continue
        region = make_region(tuple(a for a, _ in cell), tuple(b for _, b in cell))
        if density:
            c = np.array(draw(coef)).reshape((1,) * len(scope))
        else:
            shape = tuple(draw(st.integers(1, max_degree + 1)) for _ in scope)
            vals = draw(st.lists(coef, min_size=int(np.prod(shape)), max_size=int(np.prod(shape))))
            c = np.array(vals).reshape(shape)
        pieces.append(Piece(region, Polynomial(c, region.origin())))
    return MOP(scope, pieces)


def sample_points(scope, n=200, lo=-2.5, hi=2.5, seed=0):
    rng = np.random.default_rng(seed)
    return {v: rng.uniform(lo, hi, n) for v in scope}


def close(got, want, rel=1e-9):
    got, want = np.asarray(got, float), np.asarray(want, float)
    scale = 1.0 + np.max(np.abs(want), initial=0.0)
    return np.allclose(got, want, rtol=0.0, atol=rel * scale)


def exercise_threshold(fn, config=()):
    """Log-price where a put decision switches from exercising to holding.

    Policies also switch outside [5, 35) where the price has no mass; those
    points are ignored.
    """
    pts = [x for x, a, b in fn.rules[config].switch_points()
           if a.startswith("e") and b.startswith("h") and math.log(5) <= x < math.log(35)]
    assert len(pts) == 1, pts
    return pts[0]


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
