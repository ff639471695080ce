"""MOP approximations of densities and smooth curves via piecewise Taylor series."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import sympy as sp
from numpy.polynomial import hermite_e

from hybridid.mop import MOP, Piece, Region, add, maximize_1d, normalize, taylor_mop
from hybridid.polynomial import Polynomial

NEGATIVITY_TOL = 1e-9

NORMAL = "normal"
LOGNORMAL = "lognormal"
STANDARD_NORMAL = "standard-normal"


@dataclass(frozen=True)
class DistributionSpec:
    """A closed-form density and the recipe for its MOP approximation.

    ``truncation`` is in standard scores of the underlying normal.
    """

    family: str
    mean: float = 0.0
    variance: float = 1.0
    truncation: tuple[float, float] = (-3.0, 3.0)
    pieces: int = 6
    degree: int = 3

    def __post_init__(self):
        if self.family not in (NORMAL, LOGNORMAL, STANDARD_NORMAL):
            raise ValueError(f"unknown family {self.family!r}")
        if self.pieces < 2 or self.degree < 2:
            raise ValueError("need at least 2 pieces and degree 2")
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        lo, hi = self.truncation
        mass = 0.5 * (math.erf(hi / math.sqrt(2)) - math.erf(lo / math.sqrt(2)))
        if mass < 0.997 - 1e-12:
            raise ValueError(f"truncation {self.truncation} keeps only {mass:.5f} of the mass")
        if self.family != LOGNORMAL:
            std_normal_mop(self.pieces, self.degree, tuple(self.truncation))

    @property
    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def mop(self, var: str) -> MOP:
        if self.family == LOGNORMAL:
            raise ValueError("lognormal densities are modelled through their logarithm; "
                             "declare a normal log-variable instead")
        return normal_mop(self.mean, self.variance, var=var, pieces=self.pieces,
                          degree=self.degree, truncation=self.truncation)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        z = rng.standard_normal(n)
        x = self.mean + self.sigma * z
        return np.exp(x) if self.family == LOGNORMAL else x


def _phi_derivatives(c: float, n: int) -> list[float]:
    dens = math.exp(-0.5 * c * c) / math.sqrt(2 * math.pi)
    return [(-1) ** k * hermite_e.hermeval(c, [0] * k + [1]) * dens for k in range(n + 1)]


def reflect(m: MOP) -> MOP:
    """``m(-x)`` for a one-variable MOP."""
    (var,) = m.scope
    pieces = []
    for p in m.pieces:
        c = p.poly.coef * (-1.0) ** np.arange(p.poly.coef.shape[0])
        region = Region((-p.region.hi[0],), (-p.region.lo[0],))
        pieces.append(Piece(region, Polynomial(c, (-p.poly.origin[0],))))
    return MOP((var,), pieces)


@lru_cache(maxsize=None)
def std_normal_mop(pieces: int = 6, degree: int = 3,
                   truncation: tuple[float, float] = (-3.0, 3.0), var: str = "z") -> MOP:
    """Equal-width Taylor pieces of the standard normal density about their
    midpoints, symmetrized and normalized."""
    lo, hi = truncation
    edges = np.linspace(lo, hi, pieces + 1)
    intervals = [(float(a), float(b)) for a, b in zip(edges[:-1], edges[1:])]
    centers = [0.5 * (a + b) for a, b in intervals]
    raw = taylor_mop(_phi_derivatives, var, intervals, centers, degree)
    sym = add(raw, reflect(raw)).scaled(0.5) if -lo == hi else raw
    out = normalize(sym, var)
    low, at = maximize_1d(out.scaled(-1.0), truncation)
    if -low < -NEGATIVITY_TOL:
        raise ValueError(f"{pieces}-piece degree-{degree} recipe on {truncation} goes negative "
                         f"({-low:.3g} at {at:.4g}); use more pieces or a higher degree")
    return out


def normal_mop(mean: float, variance: float, var: str = "x", pieces: int = 6, degree: int = 3,
               truncation: tuple[float, float] = (-3.0, 3.0)) -> MOP:
    """Affine image of :func:`std_normal_mop`: ``phi((x - mean)/sigma)/sigma``."""
    if not variance > 0:
        raise ValueError("variance must be positive")
    sigma = math.sqrt(variance)
    base = std_normal_mop(pieces, degree, tuple(truncation))
    out = []
    for p in base.pieces:
        k = np.arange(p.poly.coef.shape[0])
        coef = p.poly.coef * sigma ** (-k) / sigma
        region = Region((mean + sigma * p.region.lo[0],), (mean + sigma * p.region.hi[0],))
        out.append(Piece(region, Polynomial(coef, (mean + sigma * p.poly.origin[0],))))
    return MOP((var,), out)


def sympy_derivatives(expr: sp.Expr, symbol: sp.Symbol, degree: int):
    """Evaluator ``(c, n) -> [f(c), f'(c), ...]`` for :func:`taylor_mop`."""
    funcs = []
    d = expr
    for _ in range(degree + 1):
        funcs.append(sp.lambdify(symbol, d, "math"))
        d = sp.diff(d, symbol)

    def derivatives(c: float, n: int) -> list[float]:
        return [float(f(c)) for f in funcs[: n + 1]]

    return derivatives


def taylor_curve(expr: sp.Expr | str, var: str, pieces: Sequence[tuple[float, float, float]],
                 degree: int) -> MOP:
    """Piecewise Taylor MOP of a one-variable expression; pieces are
    ``(lo, hi, center)``."""
    sym = sp.Symbol(var)
    if isinstance(expr, str):
        expr = sp.sympify(expr, locals={var: sym})
    extra = expr.free_symbols - {sym}
    if extra:
        raise ValueError(f"curve depends on {sorted(map(str, extra))} besides {var}")
    ders = sympy_derivatives(expr, sym, degree)
    return taylor_mop(ders, var, [(a, b) for a, b, _ in pieces], [c for _, _, c in pieces], degree)


def lognormal_value_mop(var: str, pieces: Sequence[tuple[float, float, float]],
                        degree: int = 3) -> MOP:
    """Taylor MOP of ``exp(var)``: a price as a function of its logarithm."""
    return taylor_mop(lambda c, n: [math.exp(c)] * (n + 1), var,
                      [(a, b) for a, b, _ in pieces], [c for _, _, c in pieces], degree)
