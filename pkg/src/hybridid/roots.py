"""Real-root isolation for univariate polynomials on an interval.

Roots are bracketed on a subdivision by the (recursively found) critical
points, so every cell is monotone, then polished by safeguarded Newton.
Critical points where the polynomial touches zero are reported as roots.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from hybridid import kernels

EPS_ROOT = 1e-10
_XTOL = 4e-16


@dataclass(frozen=True)
class RootList:
    """Sorted roots in an interval with their residuals.

    ``everywhere_zero`` flags the identically-zero polynomial, for which no
    finite root list exists; callers treat it as "no crossing".
    """

    roots: tuple[float, ...]
    residuals: tuple[float, ...]
    everywhere_zero: bool = False

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)


def _trim1(c: np.ndarray) -> np.ndarray:
    c = np.asarray(c, dtype=float).reshape(-1)
    nz = np.nonzero(c)[0]
    if not nz.size:
        return np.zeros(1)
    return c[: nz[-1] + 1]


def _eval(c, x):
    return float(kernels.horner(c, np.array([x]))[0])


def cauchy_bound(c) -> float:
    """Every root ``t`` of ``c`` satisfies ``|t| < bound``."""
    c = _trim1(c)
    if len(c) <= 1:
        return 0.0
    return 1.0 + float(np.max(np.abs(c[:-1])) / abs(c[-1]))


def _roots_local(c: np.ndarray, lo: float, hi: float, scale: float) -> list[float]:
    n = len(c) - 1
    if n <= 0:
        return []
    if n == 1:
        r = -c[0] / c[1]
        return [r] if lo <= r <= hi else []
    crit = _roots_local(_trim1(np.arange(1, n + 1) * c[1:]), lo, hi, scale)
    knots = [lo] + [x for x in crit if lo < x < hi] + [hi]
    tol = EPS_ROOT * scale
    found = []
    vals = [_eval(c, x) for x in knots]
    for i, (a, b) in enumerate(zip(knots[:-1], knots[1:])):
        fa, fb = vals[i], vals[i + 1]
        if abs(fa) <= tol:
            found.append(a)
        elif (fa < 0.0) != (fb < 0.0) and abs(fb) > tol:
            found.append(kernels.refine_root(c, a, b, _XTOL))
    if abs(vals[-1]) <= tol:
        found.append(knots[-1])
    found.sort()
    merged: list[float] = []
    for r in found:
        if merged and abs(r - merged[-1]) <= 1e-12 * (1.0 + abs(r)):
            continue
        merged.append(r)
    return merged


def _drop_negligible(c: np.ndarray, radius: float) -> np.ndarray:
    """Strip leading terms that cannot matter anywhere within ``radius``."""
    r = radius if np.isfinite(radius) and radius > 1.0 else 1.0
    with np.errstate(over="ignore"):
        size = np.abs(c) * r ** np.arange(len(c))
    top = float(np.max(size[np.isfinite(size)], initial=0.0))
    k = len(c)
    while k > 1 and np.isfinite(size[k - 1]) and size[k - 1] <= 1e-17 * top:
        k -= 1
    return c[:k]


def roots_in_interval(coef, lo: float, hi: float, origin: float = 0.0) -> RootList:
    """All real roots of ``sum coef[k] (x - origin)**k`` in ``[lo, hi]``.

    Infinite ends are clipped to the Cauchy root bound.
    """
    c = _trim1(coef)
    if len(c) == 1:
        return RootList((), (), everywhere_zero=c[0] == 0.0)
    tlo, thi = lo - origin, hi - origin
    c = _drop_negligible(c, max(abs(tlo), abs(thi)))
    if len(c) == 1:
        return RootList((), (), everywhere_zero=c[0] == 0.0)
    bound = cauchy_bound(c)
    tlo = max(tlo, -bound - 1.0)
    thi = min(thi, bound + 1.0)
    if not tlo < thi:
        return RootList((), ())
    grid = np.linspace(tlo, thi, 2 * len(c) + 1)
    scale = 1.0 + float(np.max(np.abs(kernels.horner(c, grid))))
    roots = _roots_local(c, tlo, thi, scale)
    xs = tuple(float(r + origin) for r in roots if lo <= r + origin <= hi)
    res = tuple(abs(_eval(c, x - origin)) for x in xs)
    return RootList(xs, res)
