"""Mixtures of polynomials: piecewise polynomials on disjoint regions.

A region is a half-open box, optionally cut by affine bands
``lo <= c . x < hi``. Bands only appear when a deterministic relation such as
``qa = qn + z1`` is substituted into a function with finite breakpoints; the
next integration over one of the band's two variables turns them back into
boxes. Everything outside the pieces is zero.

All pieces of a MOP are aligned to its scope, a sorted tuple of variable
names. Operations are pure; MOP values are immutable.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from hybridid import kernels
from hybridid.errors import (EmptyMaximizationError, MOPError, NonPositiveMassError,
                             NonRectangularError, ScopeConflictError,
                             UnboundedIntegralError, UnsupportedScopeError)
from hybridid.polynomial import Polynomial
from hybridid.roots import RootList, cauchy_bound, roots_in_interval

INF = math.inf
_PRUNE_RTOL = 1e-12

__all__ = [
    "LinearConstraint", "Region", "Piece", "MOP", "add", "multiply", "integrate_out",
    "differentiate", "substitute", "pointwise_max", "pointwise_max_many", "maximize_1d",
    "taylor_mop", "normalize", "roots_in_interval", "RootList", "divide_entries",
]


@dataclass(frozen=True)
class LinearConstraint:
    """``lo <= sum(coeffs[i] * x[i]) < hi`` with coeffs aligned to the scope."""

    coeffs: tuple[float, ...]
    lo: float
    hi: float

    def values(self, points: np.ndarray) -> np.ndarray:
        return points @ np.asarray(self.coeffs)

    def range_over(self, lo: Sequence[float], hi: Sequence[float]) -> tuple[float, float]:
        mn = mx = 0.0
        for c, a, b in zip(self.coeffs, lo, hi):
            if c == 0.0:
                continue
            x, y = c * a, c * b
            mn += min(x, y)
            mx += max(x, y)
        return mn, mx

    def axes(self) -> list[int]:
        return [i for i, c in enumerate(self.coeffs) if c != 0.0]


def _axis_origin(lo: float, hi: float) -> float:
    if math.isfinite(lo) and math.isfinite(hi):
        return 0.5 * (lo + hi)
    if math.isfinite(lo):
        return lo
    if math.isfinite(hi):
        return hi
    return 0.0


@dataclass(frozen=True)
class Region:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    constraints: tuple[LinearConstraint, ...] = ()

    @property
    def is_box(self) -> bool:
        return not self.constraints

    def origin(self) -> tuple[float, ...]:
        return tuple(_axis_origin(a, b) for a, b in zip(self.lo, self.hi))

    def bounds(self, scope: Sequence[str]) -> dict[str, tuple[float, float]]:
        return {v: (a, b) for v, a, b in zip(scope, self.lo, self.hi)}

    def contains(self, points: np.ndarray) -> np.ndarray:
        n = points.shape[0]
        mask = np.ones(n, dtype=bool)
        if points.shape[1]:
            mask &= np.all(points >= np.asarray(self.lo), axis=1)
            mask &= np.all(points < np.asarray(self.hi), axis=1)
        for c in self.constraints:
            v = c.values(points)
            mask &= (v >= c.lo) & (v < c.hi)
        return mask

    def representative(self) -> np.ndarray:
        pt = []
        for a, b in zip(self.lo, self.hi):
            if math.isfinite(a) and math.isfinite(b):
                pt.append(0.5 * (a + b))
            elif math.isfinite(a):
                pt.append(a + 1.0)
            elif math.isfinite(b):
                pt.append(b - 1.0)
            else:
                pt.append(0.0)
        return np.asarray(pt)


def make_region(lo, hi, constraints=()) -> Region | None:
    """Normalized region or ``None`` when provably empty.

    Single-variable bands fold into the box; bands implied by the box are
    dropped; parallel bands on the same form are intersected.
    """
    lo = [float(x) for x in lo]
    hi = [float(x) for x in hi]
    merged: dict[tuple[float, ...], list[float]] = {}
    for c in constraints:
        ax = c.axes()
        if not ax:
            if not (c.lo <= 0.0 < c.hi):
                return None
            continue
        if len(ax) == 1:
            i = ax[0]
            a = c.coeffs[i]
            b1, b2 = c.lo / a, c.hi / a
            if a < 0:
                b1, b2 = b2, b1
            lo[i] = max(lo[i], b1)
            hi[i] = min(hi[i], b2)
            continue
        key = tuple(c.coeffs)
        if key in merged:
            merged[key][0] = max(merged[key][0], c.lo)
            merged[key][1] = min(merged[key][1], c.hi)
        else:
            merged[key] = [c.lo, c.hi]
    if any(not a < b for a, b in zip(lo, hi)):
        return None
    kept = []
    for key, (clo, chi) in merged.items():
        if not clo < chi:
            return None
        c = LinearConstraint(key, clo, chi)
        mn, mx = c.range_over(lo, hi)
        if mx <= clo or mn >= chi:
            return None
        if mn >= clo and mx <= chi:
            continue
        kept.append(c)
    kept.sort(key=lambda c: (c.coeffs, c.lo, c.hi))
    return Region(tuple(lo), tuple(hi), tuple(kept))


def intersect(a: Region, b: Region) -> Region | None:
    lo = [max(x, y) for x, y in zip(a.lo, b.lo)]
    hi = [min(x, y) for x, y in zip(a.hi, b.hi)]
    if any(not x < y for x, y in zip(lo, hi)):
        return None
    if not a.constraints and not b.constraints:
        return Region(tuple(lo), tuple(hi))
    return make_region(lo, hi, a.constraints + b.constraints)


def subtract(r: Region, s: Region) -> list[Region]:
    """Disjoint regions covering ``r`` minus ``s``."""
    if intersect(r, s) is None:
        return [r]
    parts: list[Region | None] = []
    lo, hi = list(r.lo), list(r.hi)
    for d in range(len(lo)):
        if lo[d] < s.lo[d]:
            h = list(hi)
            h[d] = s.lo[d]
            parts.append(make_region(lo, h, r.constraints))
            lo[d] = s.lo[d]
        if s.hi[d] < hi[d]:
            l2 = list(lo)
            l2[d] = s.hi[d]
            parts.append(make_region(l2, hi, r.constraints))
            hi[d] = s.hi[d]
    done: list[LinearConstraint] = []
    for c in s.constraints:
        for a, b in ((-INF, c.lo), (c.hi, INF)):
            if a < b:
                parts.append(make_region(lo, hi, r.constraints + tuple(done)
                                         + (LinearConstraint(c.coeffs, a, b),)))
        done.append(c)
    return [p for p in parts if p is not None]


@dataclass(frozen=True)
class Piece:
    region: Region
    poly: Polynomial


def _significant(poly: Polynomial, scale: float) -> bool:
    return not poly.is_zero(_PRUNE_RTOL * max(scale, 1e-300))


class MOP:
    """Piecewise polynomial over a sorted tuple of continuous variables."""

    __slots__ = ("scope", "pieces")

    def __init__(self, scope: Iterable[str], pieces: Iterable[Piece] = ()):
        scope = tuple(scope)
        if list(scope) != sorted(set(scope)):
            raise ValueError(f"scope must be sorted and unique, got {scope}")
        self.scope = scope
        ps = [p for p in pieces if not p.poly.is_zero()]
        ps.sort(key=lambda p: (p.region.lo, p.region.hi))
        self.pieces = tuple(ps)

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, scope: Iterable[str] = ()) -> "MOP":
        return cls(tuple(sorted(scope)))

    @classmethod
    def constant(cls, value: float, scope: Iterable[str] = ()) -> "MOP":
        scope = tuple(sorted(scope))
        d = len(scope)
        region = Region((-INF,) * d, (INF,) * d)
        return cls(scope, [Piece(region, Polynomial.constant(value, d))])

    @classmethod
    def from_pieces(cls, scope: Iterable[str],
                    pieces: Iterable[tuple[Mapping[str, tuple[float, float]], Polynomial | Mapping]],
                    ) -> "MOP":
        """Build from ``(bounds, poly)`` pairs.

        ``bounds`` maps variables to intervals (missing variables are
        unbounded). ``poly`` is a :class:`Polynomial` aligned to the sorted
        scope, or a mapping ``{exponent tuple: coefficient}`` in global
        coordinates (expanded about the origin).
        """
        scope = tuple(sorted(scope))
        out = []
        for bounds, poly in pieces:
            lo = tuple(float(bounds.get(v, (-INF, INF))[0]) for v in scope)
            hi = tuple(float(bounds.get(v, (-INF, INF))[1]) for v in scope)
            region = make_region(lo, hi)
            if region is None:
                continue
            if not isinstance(poly, Polynomial):
                poly = Polynomial.from_terms(dict(poly), len(scope))
            out.append(Piece(region, poly.shifted(region.origin())))
        return cls(scope, out)

    @classmethod
    def univariate(cls, var: str, pieces: Iterable[tuple[float, float, Sequence[float]]]) -> "MOP":
        """Pieces ``(lo, hi, ascending global coefficients)`` in one variable."""
        return cls.from_pieces(
            (var,), [({var: (lo, hi)}, Polynomial(np.asarray(c, dtype=float), (0.0,)))
                     for lo, hi, c in pieces])

    @classmethod
    def indicator(cls, bounds: Mapping[str, tuple[float, float]]) -> "MOP":
        scope = tuple(sorted(bounds))
        return cls.from_pieces(scope, [(bounds, Polynomial.constant(1.0, len(scope)))])

    # -- inspection -------------------------------------------------------
    def __len__(self) -> int:
        return len(self.pieces)

    @property
    def is_box(self) -> bool:
        return all(p.region.is_box for p in self.pieces)

    def degree(self) -> int:
        return max((p.poly.degree() for p in self.pieces), default=0)

    def is_zero(self, tol: float = 0.0) -> bool:
        return all(p.poly.is_zero(tol) for p in self.pieces)

    def scale(self) -> float:
        return max((p.poly.max_abs() for p in self.pieces), default=0.0)

    def is_scalar(self) -> bool:
        return not self.scope

    def scalar(self) -> float:
        if self.scope:
            raise MOPError(f"MOP over {self.scope} is not a scalar")
        return float(sum(p.poly.constant_value() for p in self.pieces))

    def breakpoints(self, var: str) -> list[float]:
        ax = self.scope.index(var)
        pts = {b for p in self.pieces for b in (p.region.lo[ax], p.region.hi[ax])}
        return sorted(x for x in pts if math.isfinite(x))

    def support_hull(self) -> dict[str, tuple[float, float]]:
        out = {}
        for i, v in enumerate(self.scope):
            out[v] = (min((p.region.lo[i] for p in self.pieces), default=0.0),
                      max((p.region.hi[i] for p in self.pieces), default=0.0))
        return out

    # -- evaluation -------------------------------------------------------
    def evaluate(self, points: Mapping[str, np.ndarray] | None = None, **kw) -> np.ndarray:
        pts = dict(points or {})
        pts.update(kw)
        cols = [np.atleast_1d(np.asarray(pts[v], dtype=float)) for v in self.scope]
        if cols:
            cols = np.broadcast_arrays(*cols)
            shape = cols[0].shape
            arr = np.stack([c.reshape(-1) for c in cols], axis=1)
        else:
            sizes = [np.size(x) for x in pts.values()]
            shape = (max(sizes),) if sizes else (1,)
            arr = np.zeros((int(np.prod(shape)), 0))
        out = np.zeros(arr.shape[0])
        for p in self.pieces:
            mask = p.region.contains(arr)
            if mask.any():
                out[mask] = p.poly.evaluate(arr[mask])
        return out.reshape(shape)

    def __call__(self, point: Mapping[str, float] | float | None = None, **kw) -> float:
        if point is not None and not isinstance(point, Mapping):
            if len(self.scope) != 1:
                raise MOPError("positional evaluation needs a one-variable MOP")
            point = {self.scope[0]: point}
        pts = dict(point or {})
        pts.update(kw)
        return float(self.evaluate({v: np.array([pts[v]]) for v in self.scope} or
                                   {"_": np.array([0.0])})[0])

    # -- alignment --------------------------------------------------------
    def extend(self, scope: Iterable[str]) -> "MOP":
        scope = tuple(sorted(set(scope) | set(self.scope)))
        if scope == self.scope:
            return self
        idx = [self.scope.index(v) if v in self.scope else None for v in scope]
        out = []
        for p in self.pieces:
            r = p.region
            lo = tuple(r.lo[i] if i is not None else -INF for i in idx)
            hi = tuple(r.hi[i] if i is not None else INF for i in idx)
            cons = tuple(LinearConstraint(tuple(c.coeffs[i] if i is not None else 0.0 for i in idx),
                                          c.lo, c.hi) for c in r.constraints)
            out.append(Piece(Region(lo, hi, cons), p.poly.realign(self.scope, scope)))
        return MOP(scope, out)

    def drop_unused(self) -> "MOP":
        """Remove scope variables none of whose pieces depend on or bound them."""
        keep = []
        for i, v in enumerate(self.scope):
            used = any(p.poly.coef.shape[i] > 1 or math.isfinite(p.region.lo[i])
                       or math.isfinite(p.region.hi[i])
                       or any(c.coeffs[i] != 0.0 for c in p.region.constraints)
                       for p in self.pieces)
            if used:
                keep.append(v)
        return self.project_scope(keep)

    def project_scope(self, keep: Sequence[str]) -> "MOP":
        keep = tuple(sorted(keep))
        if keep == self.scope:
            return self
        idx = [self.scope.index(v) for v in keep]
        out = []
        for p in self.pieces:
            r = p.region
            cons = tuple(LinearConstraint(tuple(c.coeffs[i] for i in idx), c.lo, c.hi)
                         for c in r.constraints)
            out.append(Piece(Region(tuple(r.lo[i] for i in idx), tuple(r.hi[i] for i in idx), cons),
                             p.poly.realign(self.scope, keep)))
        return MOP(keep, out)

    # -- operators --------------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = MOP.constant(float(other))
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return self.scaled(-1.0)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = MOP.constant(float(other))
        return add(self, -other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return self.scaled(float(other))
        return multiply(self, other)

    __rmul__ = __mul__

    def scaled(self, c: float) -> "MOP":
        if c == 0.0:
            return MOP(self.scope)
        return MOP(self.scope, [Piece(p.region, p.poly.scale(c)) for p in self.pieces])

    def structurally_equal(self, other: "MOP") -> bool:
        return (self.scope == other.scope and len(self.pieces) == len(other.pieces)
                and all(a.region == b.region and a.poly == b.poly
                        for a, b in zip(self.pieces, other.pieces)))

    def __repr__(self):
        return f"MOP(scope={self.scope}, pieces={len(self.pieces)}, degree={self.degree()})"


# ---------------------------------------------------------------------------
# refinement helpers

def _sum_boxes(scope: tuple[str, ...], pieces: Sequence[Piece]) -> list[Piece]:
    """Sum overlapping box pieces on the common grid refinement."""
    d = len(scope)
    if not pieces:
        return []
    scale = max(p.poly.max_abs() for p in pieces)
    if d == 0:
        acc = pieces[0].poly
        for p in pieces[1:]:
            acc = acc.add(p.poly)
        return [Piece(pieces[0].region, acc)] if _significant(acc, scale) else []
    breaks = [sorted({b for p in pieces for b in (p.region.lo[i], p.region.hi[i])}) for i in range(d)]
    cells: dict[tuple[int, ...], list[int]] = {}
    for k, p in enumerate(pieces):
        ranges = []
        for i in range(d):
            a = breaks[i].index(p.region.lo[i])
            b = breaks[i].index(p.region.hi[i])
            ranges.append(range(a, b))
        for cell in itertools.product(*ranges):
            cells.setdefault(cell, []).append(k)
    out = []
    for cell in sorted(cells):
        members = cells[cell]
        lo = tuple(breaks[i][cell[i]] for i in range(d))
        hi = tuple(breaks[i][cell[i] + 1] for i in range(d))
        region = Region(lo, hi)
        if len(members) == 1:
            poly = pieces[members[0]].poly
        else:
            origin = region.origin()
            poly = pieces[members[0]].poly.shifted(origin)
            for k in members[1:]:
                poly = poly.add(pieces[k].poly)
        if _significant(poly, scale):
            out.append(Piece(region, poly))
    return _merge_adjacent(out)


def _merge_adjacent(pieces: list[Piece]) -> list[Piece]:
    """Fuse neighbouring boxes carrying the same polynomial."""
    if len(pieces) < 2 or not pieces[0].region.lo:
        return pieces
    d = len(pieces[0].region.lo)
    for axis in range(d):
        groups: dict[tuple, list[Piece]] = {}
        rest = []
        for p in pieces:
            if not p.region.is_box:
                rest.append(p)
                continue
            key = tuple((p.region.lo[i], p.region.hi[i]) for i in range(d) if i != axis)
            groups.setdefault(key, []).append(p)
        merged = rest
        for key in groups:
            run = sorted(groups[key], key=lambda p: p.region.lo[axis])
            cur = run[0]
            for nxt in run[1:]:
                if cur.region.hi[axis] == nxt.region.lo[axis] and \
                        cur.poly.coef.shape == nxt.poly.coef.shape and \
                        cur.poly.allclose(nxt.poly, rtol=1e-12, atol=1e-13 * (1.0 + cur.poly.max_abs())):
                    lo = list(cur.region.lo)
                    hi = list(cur.region.hi)
                    hi[axis] = nxt.region.hi[axis]
                    region = Region(tuple(lo), tuple(hi))
                    cur = Piece(region, cur.poly.shifted(region.origin()))
                else:
                    merged.append(cur)
                    cur = nxt
            merged.append(cur)
        pieces = merged
    return pieces


def _add_general(scope, a: Sequence[Piece], b: Sequence[Piece]) -> list[Piece]:
    scale = max([p.poly.max_abs() for p in list(a) + list(b)] or [0.0])
    out = []
    for pa in a:
        for pb in b:
            r = intersect(pa.region, pb.region)
            if r is not None:
                poly = pa.poly.add(pb.poly, r.origin())
                if _significant(poly, scale):
                    out.append(Piece(r, poly))
    for src, other in ((a, b), (b, a)):
        for p in src:
            parts = [p.region]
            for q in other:
                parts = [x for part in parts for x in subtract(part, q.region)]
                if not parts:
                    break
            out.extend(Piece(r, p.poly) for r in parts)
    return out


def _sum_pieces(scope, pieces: Sequence[Piece]) -> list[Piece]:
    if all(p.region.is_box for p in pieces):
        return _sum_boxes(scope, pieces)
    acc: list[Piece] = []
    for p in pieces:
        acc = _add_general(scope, acc, [p])
    return acc


# ---------------------------------------------------------------------------
# algebra

def add(a: MOP, b: MOP) -> MOP:
    """Pointwise sum on the common refinement of both piece sets."""
    scope = tuple(sorted(set(a.scope) | set(b.scope)))
    a, b = a.extend(scope), b.extend(scope)
    if not a.pieces:
        return b
    if not b.pieces:
        return a
    return MOP(scope, _sum_pieces(scope, list(a.pieces) + list(b.pieces)))


def multiply(a: MOP, b: MOP) -> MOP:
    """Pointwise product; pieces are the nonempty pairwise intersections."""
    scope = tuple(sorted(set(a.scope) | set(b.scope)))
    a, b = a.extend(scope), b.extend(scope)
    if not a.pieces or not b.pieces:
        return MOP(scope)
    d = len(scope)
    out = []
    if d:
        alo = np.array([p.region.lo for p in a.pieces])
        ahi = np.array([p.region.hi for p in a.pieces])
        blo = np.array([p.region.lo for p in b.pieces])
        bhi = np.array([p.region.hi for p in b.pieces])
        lo = np.maximum(alo[:, None, :], blo[None, :, :])
        hi = np.minimum(ahi[:, None, :], bhi[None, :, :])
        ok = np.all(lo < hi, axis=2)
        pairs = zip(*np.nonzero(ok))
    else:
        pairs = itertools.product(range(len(a.pieces)), range(len(b.pieces)))
    for i, j in pairs:
        pa, pb = a.pieces[i], b.pieces[j]
        r = intersect(pa.region, pb.region)
        if r is None:
            continue
        origin = r.origin()
        poly = pa.poly.mul(pb.poly, origin)
        if not poly.is_zero():
            out.append(Piece(r, poly))
    return MOP(scope, out)


def _affine_poly(ndim: int, axis_u: int | None, const: float, slope: float,
                 origin: Sequence[float]) -> Polynomial:
    """``const + slope * x_u`` expanded about ``origin``."""
    shape = [1] * ndim
    if axis_u is not None and slope != 0.0:
        shape[axis_u] = 2
    coef = np.zeros(shape)
    base = const + (slope * origin[axis_u] if axis_u is not None else 0.0)
    coef.reshape(-1)[0] = base
    if axis_u is not None and slope != 0.0:
        idx = [0] * ndim
        idx[axis_u] = 1
        coef[tuple(idx)] = slope
    return Polynomial(coef, origin)


def _drop_axis_region(r: Region, ax: int, lo=None, hi=None, u=None) -> tuple[list, list, tuple]:
    nlo = list(r.lo)
    nhi = list(r.hi)
    if u is not None:
        nlo[u], nhi[u] = lo, hi
    del nlo[ax], nhi[ax]
    cons = tuple(LinearConstraint(c.coeffs[:ax] + c.coeffs[ax + 1:], c.lo, c.hi)
                 for c in r.constraints if c.coeffs[ax] == 0.0)
    return nlo, nhi, cons


def integrate_out(m: MOP, var: str) -> MOP:
    """Exact integral over ``var`` on every piece; the result drops ``var``."""
    if var not in m.scope:
        raise MOPError(f"{var} not in scope {m.scope}")
    ax = m.scope.index(var)
    scope = m.scope[:ax] + m.scope[ax + 1:]
    out: list[Piece] = []
    d = len(m.scope)
    for p in m.pieces:
        r = p.region
        F = p.poly.antiderivative(ax)
        cons_v = [c for c in r.constraints if c.coeffs[ax] != 0.0]
        if not cons_v:
            a, b = r.lo[ax], r.hi[ax]
            if not (math.isfinite(a) and math.isfinite(b)):
                raise UnboundedIntegralError(f"piece unbounded in {var}: [{a}, {b})")
            val = F.fix_axis(ax, b).sub(F.fix_axis(ax, a))
            nlo, nhi, cons = _drop_axis_region(r, ax)
            region = make_region(nlo, nhi, cons)
            if region is None:
                continue
            poly = val.realign(m.scope, scope).shifted(region.origin())
            out.append(Piece(region, poly))
            continue
        others = {i for c in cons_v for i in c.axes() if i != ax}
        if len(others) != 1:
            raise NonRectangularError(
                f"integrating {var} across bands involving {[m.scope[i] for i in sorted(others)]}")
        u = others.pop()
        lowers: list[tuple[float, float]] = []
        uppers: list[tuple[float, float]] = []
        if math.isfinite(r.lo[ax]):
            lowers.append((r.lo[ax], 0.0))
        if math.isfinite(r.hi[ax]):
            uppers.append((r.hi[ax], 0.0))
        for c in cons_v:
            a, bu = c.coeffs[ax], c.coeffs[u]
            for bound, is_lo in ((c.lo, True), (c.hi, False)):
                if not math.isfinite(bound):
                    continue
                aff = (bound / a, -bu / a)
                (lowers if (is_lo == (a > 0)) else uppers).append(aff)
        if not lowers or not uppers:
            raise UnboundedIntegralError(f"piece unbounded in {var}")
        ulo, uhi = r.lo[u], r.hi[u]
        cuts = set()
        allb = lowers + uppers
        for (c1, s1), (c2, s2) in itertools.combinations(allb, 2):
            if s1 != s2:
                x = (c2 - c1) / (s1 - s2)
                if ulo < x < uhi:
                    cuts.add(x)
        knots = [ulo] + sorted(cuts) + [uhi]
        for a_u, b_u in zip(knots[:-1], knots[1:]):
            rep = Region((a_u,), (b_u,)).representative()[0]
            lv = [c + s * rep for c, s in lowers]
            uv = [c + s * rep for c, s in uppers]
            li, ui = int(np.argmax(lv)), int(np.argmin(uv))
            if not lv[li] < uv[ui]:
                continue
            nlo, nhi, cons = _drop_axis_region(r, ax, a_u, b_u, u)
            region = make_region(nlo, nhi, cons)
            if region is None:
                continue
            o_sc = list(region.origin())
            o_full = o_sc[:ax] + [0.0] + o_sc[ax:]
            up = _affine_poly(d, u, uppers[ui][0], uppers[ui][1], o_full)
            lw = _affine_poly(d, u, lowers[li][0], lowers[li][1], o_full)
            val = F.compose(ax, up).sub(F.compose(ax, lw))
            poly = val.realign(m.scope, scope).shifted(region.origin())
            out.append(Piece(region, poly))
    return MOP(scope, _sum_pieces(scope, out))


def differentiate(m: MOP, var: str) -> MOP:
    """Piecewise derivative; no continuity across breakpoints is implied."""
    if var not in m.scope:
        return MOP(m.scope)
    ax = m.scope.index(var)
    return MOP(m.scope, [Piece(p.region, p.poly.derivative(ax)) for p in m.pieces])


def _complement_cells(g: MOP) -> list[Region]:
    """Boxes covering the complement of ``g``'s support."""
    d = len(g.scope)
    if d == 0:
        return [] if g.pieces else [Region((), ())]
    breaks = [[-INF] + g.breakpoints(v) + [INF] for v in g.scope]
    out = []
    for cell in itertools.product(*[range(len(b) - 1) for b in breaks]):
        lo = tuple(breaks[i][cell[i]] for i in range(d))
        hi = tuple(breaks[i][cell[i] + 1] for i in range(d))
        rep = Region(lo, hi).representative().reshape(1, -1)
        if not any(p.region.contains(rep)[0] for p in g.pieces):
            out.append(Region(lo, hi))
    return out


def substitute(m: MOP, var: str, g: MOP) -> MOP:
    """Composition ``m(y, var=g(y))``.

    ``g`` is a MOP and therefore zero off its pieces; those cells are
    covered with ``var = 0``. Breakpoints of ``m`` in ``var`` become root
    cuts when ``g`` has one active variable, or affine bands when ``g`` is
    affine in several.
    """
    if var in g.scope:
        raise ScopeConflictError(f"{var} appears in the substituted function's scope")
    if var not in m.scope:
        return m
    if not g.is_box:
        raise NonRectangularError("substituted function must have box pieces")
    full = tuple(sorted(set(m.scope) | set(g.scope)))
    res_scope = tuple(v for v in full if v != var)
    M = m.extend(full)
    G = g.extend(full)
    ax = full.index(var)
    d = len(full)
    zero_cells = [Region(_pad(c.lo, ax, -INF), _pad(c.hi, ax, INF))
                  for c in _complement_cells(g.extend(res_scope))]
    g_pieces = list(G.pieces) + [Piece(r, Polynomial.constant(0.0, d)) for r in zero_cells]
    out: list[Piece] = []
    for gp in g_pieces:
        q = gp.poly
        active = [i for i in q.active_axes()]
        affine = q.degree() <= 1
        for mp in M.pieces:
            lo = [max(x, y) for x, y in zip(mp.region.lo, gp.region.lo)]
            hi = [min(x, y) for x, y in zip(mp.region.hi, gp.region.hi)]
            vlo, vhi = mp.region.lo[ax], mp.region.hi[ax]
            lo[ax], hi[ax] = -INF, INF
            if any(not x < y for x, y in zip(lo, hi)):
                continue
            cons = [c for c in mp.region.constraints if c.coeffs[ax] == 0.0]
            for c in mp.region.constraints:
                if c.coeffs[ax] == 0.0:
                    continue
                if not affine:
                    raise NonRectangularError(
                        f"band involving {var} under a nonlinear substitution")
                k, lin = _affine_parts(q)
                cv = c.coeffs[ax]
                coeffs = tuple((c.coeffs[i] + cv * lin[i]) if i != ax else 0.0 for i in range(d))
                cons.append(LinearConstraint(coeffs, c.lo - cv * k, c.hi - cv * k))
            regions: list[Region | None]
            bounded = math.isfinite(vlo) or math.isfinite(vhi)
            if not bounded:
                regions = [make_region(lo, hi, cons)]
            elif not active:
                val = q.constant_value()
                regions = [make_region(lo, hi, cons)] if vlo <= val < vhi else []
            elif len(active) == 1:
                u = active[0]
                cuts = set()
                c1 = q.coef.reshape(-1)
                for bnd in (vlo, vhi):
                    if math.isfinite(bnd):
                        cc = c1.copy()
                        cc[0] -= bnd
                        cuts.update(roots_in_interval(cc, lo[u], hi[u], q.origin[u]).roots)
                knots = [lo[u]] + sorted(x for x in cuts if lo[u] < x < hi[u]) + [hi[u]]
                regions = []
                for a_u, b_u in zip(knots[:-1], knots[1:]):
                    rep = Region((a_u,), (b_u,)).representative()[0]
                    val = float(np.polynomial.polynomial.polyval(rep - q.origin[u], c1))
                    if vlo <= val < vhi:
                        l2, h2 = list(lo), list(hi)
                        l2[u], h2[u] = a_u, b_u
                        regions.append(make_region(l2, h2, cons))
            elif affine:
                k, lin = _affine_parts(q)
                band = LinearConstraint(tuple(lin), vlo - k, vhi - k)
                regions = [make_region(lo, hi, cons + [band])]
            else:
                raise NonRectangularError(
                    f"nonlinear multivariate substitution for {var} across a breakpoint")
            for region in regions:
                if region is None:
                    continue
                origin = region.origin()
                qq = q.shifted(origin)
                poly = mp.poly.compose(ax, qq)
                poly = poly.realign(full, res_scope)
                o = tuple(x for i, x in enumerate(origin) if i != ax)
                nr = Region(tuple(x for i, x in enumerate(region.lo) if i != ax),
                            tuple(x for i, x in enumerate(region.hi) if i != ax),
                            tuple(LinearConstraint(c.coeffs[:ax] + c.coeffs[ax + 1:], c.lo, c.hi)
                                  for c in region.constraints))
                if not poly.is_zero():
                    out.append(Piece(nr, poly.shifted(o)))
    return MOP(res_scope, _merge_adjacent(out) if all(p.region.is_box for p in out) else out)


def _pad(t: tuple, ax: int, value: float) -> tuple:
    return t[:ax] + (value,) + t[ax:]


def _affine_parts(q: Polynomial) -> tuple[float, list[float]]:
    """Constant and global linear coefficients of an affine polynomial."""
    d = q.ndim
    lin = [0.0] * d
    k = q.constant_value()
    for i in range(d):
        if q.coef.shape[i] > 1:
            idx = [0] * d
            idx[i] = 1
            lin[i] = float(q.coef[tuple(idx)])
            k -= lin[i] * q.origin[i]
    return k, lin


# ---------------------------------------------------------------------------
# maximization

def _cells_1d(mops: Sequence[MOP]) -> list[float]:
    pts = set()
    for m in mops:
        for p in m.pieces:
            pts.update(x for x in (p.region.lo[0], p.region.hi[0]) if math.isfinite(x))
    return [-INF] + sorted(pts) + [INF]


def _poly_at(m: MOP, x: float) -> Polynomial:
    pt = np.array([[x]])
    for p in m.pieces:
        if p.region.contains(pt)[0]:
            return p.poly
    return Polynomial.constant(0.0, 1)


def pointwise_max_many(mops: Sequence[MOP], tags: Sequence, tol: float = 1e-9
                       ) -> tuple[MOP, list[tuple[float, float, object]]]:
    """Upper envelope of several one-variable MOPs with the winning tag per interval.

    Ties go to the earliest alternative in ``tags``.
    """
    scope = tuple(sorted(set().union(*[m.scope for m in mops])))
    if len(scope) > 1:
        raise UnsupportedScopeError(
            f"pointwise maximum over {len(scope)} continuous variables {scope} is unsupported")
    mops = [m.extend(scope) for m in mops]
    if not scope:
        vals = [m.scalar() for m in mops]
        best = _first_max(vals, tol)
        return MOP.constant(vals[best]) if vals[best] else MOP(()), [(-INF, INF, tags[best])]
    knots = _cells_1d(mops)
    segments: list[tuple[float, float, int]] = []
    for a, b in zip(knots[:-1], knots[1:]):
        rep = Region((a,), (b,)).representative()[0]
        polys = [_poly_at(m, rep) for m in mops]
        cuts = set()
        for i, j in itertools.combinations(range(len(polys)), 2):
            diff = polys[i].sub(polys[j], (rep,))
            scale = max(polys[i].max_abs(), polys[j].max_abs())
            if diff.is_zero(1e-12 * (1.0 + scale)):
                continue
            cuts.update(roots_in_interval(diff.coef, a, b, rep).roots)
        sub = [a] + sorted(x for x in cuts if a < x < b) + [b]
        for s, t in zip(sub[:-1], sub[1:]):
            r = Region((s,), (t,)).representative()
            vals = [float(p.evaluate(r.reshape(1, 1))[0]) for p in polys]
            w = _first_max(vals, tol)
            segments.append((s, t, w, polys[w]))
    pieces = []
    policy: list[tuple[float, float, object]] = []
    for s, t, w, poly in segments:
        if not poly.is_zero():
            region = Region((s,), (t,))
            pieces.append(Piece(region, poly.shifted(region.origin())))
        if policy and policy[-1][2] == tags[w] and policy[-1][1] == s:
            policy[-1] = (policy[-1][0], t, tags[w])
        else:
            policy.append((s, t, tags[w]))
    return MOP(scope, _merge_adjacent(pieces)), policy


def _first_max(vals: Sequence[float], tol: float) -> int:
    mx = max(vals)
    thr = mx - tol * (1.0 + abs(mx))
    for i, v in enumerate(vals):
        if v >= thr:
            return i
    return int(np.argmax(vals))


def pointwise_max(a: MOP, b: MOP, tag_a="a", tag_b="b"):
    """Two-way :func:`pointwise_max_many`."""
    return pointwise_max_many([a, b], [tag_a, tag_b])


def maximize_1d(m: MOP, domain: tuple[float, float] | None = None,
                tol: float = 1e-12) -> tuple[float, float]:
    """Global maximum and leftmost maximizer of a one-variable MOP.

    Pieces are half-open, so the maximum may be a supremum approached at a
    piece's right end; that end is then reported as the maximizer.
    """
    if len(m.scope) > 1:
        raise UnsupportedScopeError(f"maximize_1d needs one variable, got {m.scope}")
    if not m.scope:
        if domain is None and not m.pieces:
            raise EmptyMaximizationError("cannot maximize the zero MOP without a domain")
        val = m.scalar() if m.pieces else 0.0
        return val, (domain[0] if domain else 0.0)
    if domain is None:
        if not m.pieces:
            raise EmptyMaximizationError("cannot maximize a MOP with no pieces without a domain")
        hull = m.support_hull()[m.scope[0]]
        domain = hull
    dlo, dhi = domain
    cands: list[tuple[float, float]] = []
    covered = []
    for p in m.pieces:
        a, b = max(p.region.lo[0], dlo), min(p.region.hi[0], dhi)
        if not a < b:
            continue
        covered.append((a, b))
        if not (math.isfinite(a) and math.isfinite(b)):
            if p.poly.degree() > 0:
                raise EmptyMaximizationError("unbounded piece in maximization domain")
        c = p.poly.coef.reshape(-1)
        o = p.poly.origin[0]
        pts = [x for x in (a, b) if math.isfinite(x)]
        if len(c) > 2:
            dc = np.arange(1, len(c)) * c[1:]
            pts.extend(roots_in_interval(dc, a, b, o).roots)
        elif not pts:
            pts = [0.0]
        for x in pts:
            cands.append((x, float(kernels.horner(c, np.array([x - o]))[0])))
    covered.sort()
    cursor = dlo
    for a, b in covered:
        if a > cursor:
            cands.append((cursor, 0.0))
        cursor = max(cursor, b)
    if cursor < dhi:
        cands.append((cursor, 0.0))
    if not cands:
        raise EmptyMaximizationError("empty maximization domain")
    best = max(v for _, v in cands)
    thr = best - tol * (1.0 + abs(best))
    arg = min(x for x, v in cands if v >= thr)
    return best, arg


# ---------------------------------------------------------------------------
# construction and normalization

def taylor_mop(derivatives: Callable[[float, int], Sequence[float]], var: str,
               intervals: Sequence[tuple[float, float]], centers: Sequence[float],
               degree: int) -> MOP:
    """Per-interval degree-``degree`` Taylor polynomials about the given centers.

    ``derivatives(c, n)`` returns ``f(c), f'(c), ..., f^(n)(c)``.
    """
    if len(intervals) != len(centers):
        raise ValueError("one center per interval")
    pieces = []
    for (lo, hi), c in zip(intervals, centers):
        ders = list(derivatives(float(c), degree))
        coef = np.array([ders[k] / math.factorial(k) for k in range(degree + 1)], dtype=float)
        region = make_region((lo,), (hi,))
        if region is None:
            continue
        pieces.append(Piece(region, Polynomial(coef, (float(c),))))
    return MOP((var,), pieces)


def normalize(m: MOP, var: str) -> MOP:
    """Scale so the integral over ``var`` is one."""
    mass = integrate_out(m, var)
    if mass.scope:
        raise MOPError("normalize expects the integral to be a constant")
    total = mass.scalar() if mass.pieces else 0.0
    if not total > 0.0:
        raise NonPositiveMassError(f"mass {total} is not positive")
    return m.scaled(1.0 / total)


def restrict(m: MOP, bounds: Mapping[str, tuple[float, float]]) -> MOP:
    """Zero ``m`` outside the box ``bounds``."""
    return multiply(m, MOP.indicator(bounds)) if bounds else m


def equals_constant(m: MOP, value: float, tol: float = 1e-9) -> bool:
    """True when ``m`` is ``value`` everywhere (up to ``tol``)."""
    diff = add(m, MOP.constant(-value, m.scope))
    return diff.is_zero(tol)


def divide_entries(a: MOP, b: MOP, tol: float = 1e-9) -> MOP:
    """Quotient ``a / b`` with ``0/0 = 0``.

    Supported when, piece by piece, ``b`` is constant or divides ``a``
    exactly; otherwise :class:`~hybridid.errors.DivisionNotClosed`.
    """
    from hybridid.errors import DivisionNotClosed

    scope = tuple(sorted(set(a.scope) | set(b.scope)))
    a, b = a.extend(scope), b.extend(scope)
    out = []
    for pa in a.pieces:
        for pb in b.pieces:
            r = intersect(pa.region, pb.region)
            if r is None:
                continue
            origin = r.origin()
            num = pa.poly.shifted(origin)
            den = pb.poly.shifted(origin)
            if den.is_constant():
                c = den.constant_value()
                if abs(c) <= 1e-300:
                    continue
                out.append(Piece(r, num.scale(1.0 / c)))
                continue
            quot = _exact_divide(num, den, tol)
            if quot is None:
                raise DivisionNotClosed("quotient of MOP entries is not a polynomial")
            out.append(Piece(r, quot))
    return MOP(scope, out)


def _exact_divide(num: Polynomial, den: Polynomial, tol: float) -> Polynomial | None:
    """Multivariate division with zero remainder, lexicographic order."""
    d = num.ndim
    nt = dict(num.terms())
    dt = den.terms()
    if not dt:
        return None
    lead = max(dt)
    lc = dt[lead]
    scale = max((abs(v) for v in nt.values()), default=0.0)
    q: dict[tuple[int, ...], float] = {}
    for _ in range(10000):
        nt = {k: v for k, v in nt.items() if abs(v) > tol * max(scale, 1e-300)}
        if not nt:
            return Polynomial.from_terms(q, d, num.origin)
        top = max(nt)
        if any(t < l for t, l in zip(top, lead)):
            return None
        mono = tuple(t - l for t, l in zip(top, lead))
        c = nt[top] / lc
        q[mono] = q.get(mono, 0.0) + c
        for k, v in dt.items():
            key = tuple(x + y for x, y in zip(k, mono))
            nt[key] = nt.get(key, 0.0) - c * v
        nt[top] = 0.0
    return None


def validate(m: MOP, samples: int = 64, seed: int = 0) -> None:
    """Raise :class:`MOPError` if ``m`` violates a structural invariant."""
    if list(m.scope) != sorted(set(m.scope)):
        raise MOPError("scope not sorted/unique")
    d = len(m.scope)
    for p in m.pieces:
        r = p.region
        if len(r.lo) != d or len(r.hi) != d or p.poly.ndim != d:
            raise MOPError("piece misaligned with scope")
        if any(not a < b for a, b in zip(r.lo, r.hi)):
            raise MOPError(f"degenerate box {r}")
        if p.poly.is_zero():
            raise MOPError("zero piece not pruned")
    rng = np.random.default_rng(seed)
    for p, q in itertools.combinations(m.pieces, 2):
        r = intersect(Region(p.region.lo, p.region.hi), Region(q.region.lo, q.region.hi))
        if r is None:
            continue
        if p.region.is_box and q.region.is_box:
            raise MOPError(f"overlapping pieces {p.region} and {q.region}")
        lo = np.array([x if math.isfinite(x) else -1e6 for x in r.lo])
        hi = np.array([x if math.isfinite(x) else 1e6 for x in r.hi])
        pts = lo + (hi - lo) * rng.random((samples, d))
        if np.any(p.region.contains(pts) & q.region.contains(pts)):
            raise MOPError(f"overlapping banded pieces {p.region} and {q.region}")
