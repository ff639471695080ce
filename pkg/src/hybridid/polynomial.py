"""Dense multivariate polynomials expanded about a local origin.

A :class:`Polynomial` stores ``coef[i, j, ...]`` as the coefficient of
``(x0 - o0)**i * (x1 - o1)**j * ...``. Expanding each piece of a MOP about
a point inside the piece keeps high-degree composites well conditioned; a
monomial basis about zero loses every digit once pieces sit far from the
origin (log-prices near 3.7, quantities near 300).

Axes are positional. Variable names live on the owning MOP, which keeps
all of its pieces aligned to one sorted scope.
"""
from __future__ import annotations

from typing import Iterable, Mapping, Sequence

import numpy as np

from hybridid import kernels

__all__ = ["Polynomial"]


def _trim(coef: np.ndarray) -> np.ndarray:
    coef = np.asarray(coef, dtype=float)
    if coef.ndim == 0:
        return coef.copy()
    idx = np.nonzero(coef)
    if idx[0].size == 0:
        return np.zeros((1,) * coef.ndim)
    ends = tuple(slice(0, int(i.max()) + 1) for i in idx)
    if all(e.stop == n for e, n in zip(ends, coef.shape)):
        return coef if coef.flags.c_contiguous else np.ascontiguousarray(coef)
    return np.ascontiguousarray(coef[ends])


def _pad_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    shape = tuple(max(x, y) for x, y in zip(a.shape, b.shape))
    out = np.zeros(shape)
    out[tuple(slice(0, n) for n in a.shape)] += a
    out[tuple(slice(0, n) for n in b.shape)] += b
    return out


class Polynomial:
    """Polynomial in local coordinates ``t = x - origin``."""

    __slots__ = ("coef", "origin")

    def __init__(self, coef, origin: Sequence[float] | None = None):
        coef = _trim(coef)
        if origin is None:
            origin = (0.0,) * coef.ndim
        origin = tuple(float(o) for o in origin)
        if len(origin) != coef.ndim:
            raise ValueError(f"origin has {len(origin)} entries for a {coef.ndim}-d array")
        self.coef = coef
        self.origin = origin

    # -- construction -----------------------------------------------------
    @classmethod
    def constant(cls, value: float, ndim: int = 0) -> "Polynomial":
        return cls(np.full((1,) * ndim, float(value)))

    @classmethod
    def from_terms(cls, terms: Mapping[tuple[int, ...], float], ndim: int,
                   origin: Sequence[float] | None = None) -> "Polynomial":
        """Build from ``{exponent tuple: coefficient}`` in local coordinates."""
        if not terms:
            return cls.constant(0.0, ndim)
        shape = [1] * ndim
        for exps in terms:
            for d, e in enumerate(exps):
                shape[d] = max(shape[d], e + 1)
        coef = np.zeros(shape)
        for exps, c in terms.items():
            coef[tuple(exps)] += c
        return cls(coef, origin)

    # -- inspection -------------------------------------------------------
    @property
    def ndim(self) -> int:
        return self.coef.ndim

    def terms(self) -> dict[tuple[int, ...], float]:
        """Nonzero coefficients keyed by exponent vector (local coordinates)."""
        if self.ndim == 0:
            v = float(self.coef)
            return {(): v} if v != 0.0 else {}
        idx = np.nonzero(self.coef)
        return {tuple(int(i) for i in k): float(self.coef[k]) for k in zip(*idx)}

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coef) <= tol))

    def is_constant(self) -> bool:
        return self.coef.size == 1

    def constant_value(self) -> float:
        return float(self.coef.reshape(-1)[0])

    def degree(self, axis: int | None = None) -> int:
        if self.ndim == 0:
            return 0
        if axis is not None:
            return self.coef.shape[axis] - 1
        idx = np.nonzero(self.coef)
        if not idx[0].size:
            return 0
        return int(np.max(np.sum(np.stack(idx), axis=0)))

    def active_axes(self) -> list[int]:
        return [d for d, n in enumerate(self.coef.shape) if n > 1]

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coef)))

    # -- re-expansion -----------------------------------------------------
    def shifted(self, origin: Sequence[float]) -> "Polynomial":
        coef = self.coef
        new_origin = tuple(float(o) for o in origin)
        for axis, (old, new) in enumerate(zip(self.origin, new_origin)):
            if coef.shape[axis] > 1 and old != new:
                coef = kernels.shift_axis(coef, axis, new - old)
        return Polynomial(coef, new_origin)

    def shifted_axes(self, origin: Sequence[float], axes: Iterable[int]) -> "Polynomial":
        target = list(self.origin)
        for a in axes:
            target[a] = origin[a]
        return self.shifted(target)

    # -- arithmetic -------------------------------------------------------
    def __neg__(self) -> "Polynomial":
        return Polynomial(-self.coef, self.origin)

    def scale(self, c: float) -> "Polynomial":
        return Polynomial(self.coef * c, self.origin)

    def add(self, other: "Polynomial", origin: Sequence[float] | None = None) -> "Polynomial":
        origin = self.origin if origin is None else tuple(origin)
        a = self.shifted(origin).coef
        b = other.shifted(origin).coef
        return Polynomial(_pad_add(a, b), origin)

    def sub(self, other: "Polynomial", origin: Sequence[float] | None = None) -> "Polynomial":
        return self.add(-other, origin)

    def mul(self, other: "Polynomial", origin: Sequence[float] | None = None) -> "Polynomial":
        origin = self.origin if origin is None else tuple(origin)
        a = self.shifted(origin).coef
        b = other.shifted(origin).coef
        return Polynomial(kernels.conv_nd(a, b), origin)

    def add_constant(self, c: float) -> "Polynomial":
        coef = self.coef.copy()
        coef.reshape(-1)[0] += c
        return Polynomial(coef, self.origin)

    # -- calculus ---------------------------------------------------------
    def derivative(self, axis: int) -> "Polynomial":
        n = self.coef.shape[axis]
        if n <= 1:
            return Polynomial(np.zeros((1,) * self.ndim), self.origin)
        k = np.arange(1, n, dtype=float)
        shape = [1] * self.ndim
        shape[axis] = n - 1
        body = np.take(self.coef, range(1, n), axis=axis) * k.reshape(shape)
        return Polynomial(body, self.origin)

    def antiderivative(self, axis: int) -> "Polynomial":
        """Antiderivative vanishing at ``x_axis = origin[axis]``."""
        n = self.coef.shape[axis]
        shape = list(self.coef.shape)
        shape[axis] = n + 1
        out = np.zeros(shape)
        k = np.arange(1, n + 1, dtype=float)
        kshape = [1] * self.ndim
        kshape[axis] = n
        index = [slice(None)] * self.ndim
        index[axis] = slice(1, n + 1)
        out[tuple(index)] = self.coef / k.reshape(kshape)
        return Polynomial(out, self.origin)

    def fix_axis(self, axis: int, value: float) -> "Polynomial":
        """Evaluate along ``axis`` at the global coordinate ``value``.

        The axis is kept with length one so alignment is preserved.
        """
        t = float(value) - self.origin[axis]
        moved = np.moveaxis(self.coef, axis, -1)
        acc = np.zeros(moved.shape[:-1])
        for j in range(moved.shape[-1] - 1, -1, -1):
            acc = acc * t + moved[..., j]
        coef = np.expand_dims(acc, axis)
        origin = list(self.origin)
        origin[axis] = 0.0
        return Polynomial(coef, origin)

    def compose(self, axis: int, q: "Polynomial") -> "Polynomial":
        """Substitute ``x_axis := q(x)``; ``q`` must not depend on ``axis``.

        The result is expanded about ``q.origin`` in the remaining axes.
        """
        if q.coef.shape[axis] != 1:
            raise ValueError("substituted polynomial depends on the replaced axis")
        target = list(q.origin)
        target[axis] = self.origin[axis]
        p = self.shifted(target)
        inner = q.add_constant(-self.origin[axis])
        inner = Polynomial(inner.coef, target)
        # Horner on raw arrays: everything already shares the origin ``target``
        n = p.coef.shape[axis]
        acc = np.take(p.coef, [n - 1], axis=axis)
        for k in range(n - 2, -1, -1):
            acc = _pad_add(kernels.conv_nd(acc, inner.coef), np.take(p.coef, [k], axis=axis))
        origin = list(q.origin)
        origin[axis] = 0.0
        return Polynomial(acc, origin)

    # -- evaluation -------------------------------------------------------
    def __call__(self, point: Sequence[float]) -> float:
        return float(self.evaluate(np.asarray(point, dtype=float).reshape(1, -1))[0])

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at ``points`` of shape ``(n, ndim)``."""
        points = np.asarray(points, dtype=float)
        n = points.shape[0]
        if self.ndim == 0:
            return np.full(n, float(self.coef))
        t = points - np.asarray(self.origin)
        if self.ndim == 1:
            return kernels.horner(self.coef, t[:, 0])
        acc = np.broadcast_to(self.coef, (n,) + self.coef.shape)
        for axis in range(self.ndim - 1, -1, -1):
            tt = t[:, axis].reshape((n,) + (1,) * axis)
            res = np.zeros(acc.shape[:-1])
            for j in range(acc.shape[-1] - 1, -1, -1):
                res = res * tt + acc[..., j]
            acc = res
        return acc

    # -- alignment --------------------------------------------------------
    def realign(self, src: Sequence[str], dst: Sequence[str]) -> "Polynomial":
        """Re-index from variable order ``src`` to ``dst`` (a superset)."""
        src = tuple(src)
        dst = tuple(dst)
        if src == dst:
            return self
        missing = [v for v in src if v not in dst and self.coef.shape[src.index(v)] > 1]
        if missing:
            raise ValueError(f"cannot drop variables {missing} with nonzero degree")
        coef = self.coef
        origin = dict(zip(src, self.origin))
        keep = [v for v in src if v in dst]
        coef = coef.reshape([coef.shape[src.index(v)] for v in keep]) if keep else coef.reshape(())
        perm_src = keep
        coef_full = coef
        for v in dst:
            if v not in perm_src:
                coef_full = coef_full[..., None]
                perm_src = perm_src + [v]
        order = [perm_src.index(v) for v in dst]
        coef_full = np.transpose(coef_full, order) if order else coef_full
        return Polynomial(coef_full, [origin.get(v, 0.0) for v in dst])

    def allclose(self, other: "Polynomial", rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        b = other.shifted(self.origin).coef
        a = self.coef
        shape = tuple(max(x, y) for x, y in zip(a.shape, b.shape))
        pa = np.zeros(shape)
        pb = np.zeros(shape)
        pa[tuple(slice(0, n) for n in a.shape)] = a
        pb[tuple(slice(0, n) for n in b.shape)] = b
        return bool(np.allclose(pa, pb, rtol=rtol, atol=atol))

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.origin == other.origin and self.coef.shape == other.coef.shape \
            and bool(np.array_equal(self.coef, other.coef))

    def __hash__(self):
        return hash((self.origin, self.coef.shape, self.coef.tobytes()))

    def __repr__(self):
        return f"Polynomial({self.terms()!r}, origin={self.origin})"
