"""Pure-Python/numpy implementations of the polynomial kernels.

These are the reference versions; ``_ckernels`` mirrors every function here
with the same signature and is preferred when it has been compiled.
"""
from math import comb

import numpy as np


def conv_nd(a, b):
    """Dense N-dimensional polynomial product (full convolution)."""
    out_shape = tuple(x + y - 1 for x, y in zip(a.shape, b.shape))
    out = np.zeros(out_shape)
    if a.size == 0 or b.size == 0:
        return out
    strides = np.ones(len(out_shape), dtype=np.intp)
    for d in range(len(out_shape) - 2, -1, -1):
        strides[d] = strides[d + 1] * out_shape[d + 1]
    ia = np.nonzero(a.ravel())[0]
    ib = np.nonzero(b.ravel())[0]
    if ia.size == 0 or ib.size == 0:
        return out
    oa = np.stack(np.unravel_index(ia, a.shape), axis=-1) @ strides if a.ndim else np.zeros(1, np.intp)
    ob = np.stack(np.unravel_index(ib, b.shape), axis=-1) @ strides if b.ndim else np.zeros(1, np.intp)
    flat = out.reshape(-1)
    np.add.at(flat, (oa[:, None] + ob[None, :]).ravel(),
              (a.ravel()[ia][:, None] * b.ravel()[ib][None, :]).ravel())
    return out


def horner(c, x):
    """Evaluate the 1-D coefficient vector ``c`` (ascending powers) at ``x``."""
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for coef in c[::-1]:
        acc = acc * x + coef
    return acc


def shift_axis(a, axis, h):
    """Re-expand along ``axis`` about a point displaced by ``h``.

    If ``a`` holds coefficients in powers of ``t``, the result holds them in
    powers of ``t - h``.
    """
    n = a.shape[axis]
    if n <= 1 or h == 0.0:
        return a.copy()
    m = np.zeros((n, n))
    for k in range(n):
        hp = 1.0
        for j in range(k, -1, -1):
            m[j, k] = comb(k, j) * hp
            hp *= h
    moved = np.moveaxis(a, axis, 0)
    res = np.tensordot(m, moved, axes=([1], [0]))
    return np.ascontiguousarray(np.moveaxis(res, 0, axis))


def refine_root(c, lo, hi, tol):
    """Root of ``c`` in ``[lo, hi]`` given a sign change, by safeguarded Newton."""
    c = np.asarray(c, dtype=float)
    flo = _h(c, lo)
    fhi = _h(c, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    dc = np.arange(1, len(c)) * c[1:]
    x = 0.5 * (lo + hi)
    fprev = float("inf")
    for _ in range(300):
        fx = _h(c, x)
        if fx == 0.0:
            return x
        if (fx < 0.0) == (flo < 0.0):
            lo, flo = x, fx
        else:
            hi = x
        if hi - lo <= tol * (1.0 + abs(x)):
            return 0.5 * (lo + hi)
        xn = 0.5 * (lo + hi)
        if abs(fx) < 0.5 * fprev:
            d = _h(dc, x)
            if d != 0.0:
                cand = x - fx / d
                if lo < cand < hi:
                    xn = cand
        fprev = abs(fx)
        if abs(xn - x) <= tol * (1.0 + abs(x)):
            return xn
        x = xn
    return x


def _h(c, x):
    acc = 0.0
    for coef in c[::-1]:
        acc = acc * x + coef
    return float(acc)
