# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled polynomial kernels; same contracts as ``_pykernels``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def conv_nd(a, b):
    a = np.require(a, np.float64, "C")
    b = np.require(b, np.float64, "C")
    out_shape = tuple(x + y - 1 for x, y in zip(a.shape, b.shape))
    out = np.zeros(out_shape)
    if a.size == 0 or b.size == 0:
        return out
    cdef Py_ssize_t nd = a.ndim
    strides = np.ones(nd, dtype=np.intp)
    cdef Py_ssize_t d
    for d in range(nd - 2, -1, -1):
        strides[d] = strides[d + 1] * out_shape[d + 1]
    if nd:
        oa_arr = (np.indices(a.shape).reshape(nd, -1).T @ strides).astype(np.intp)
        ob_arr = (np.indices(b.shape).reshape(nd, -1).T @ strides).astype(np.intp)
    else:
        oa_arr = np.zeros(1, np.intp)
        ob_arr = np.zeros(1, np.intp)
    cdef Py_ssize_t[:] oa = oa_arr
    cdef Py_ssize_t[:] ob = ob_arr
    cdef double[:] av = a.reshape(-1)
    cdef double[:] bv = b.reshape(-1)
    cdef double[:] ov = out.reshape(-1)
    cdef Py_ssize_t i, j, na = av.shape[0], nb = bv.shape[0]
    cdef double ai
    for i in range(na):
        ai = av[i]
        if ai == 0.0:
            continue
        for j in range(nb):
            ov[oa[i] + ob[j]] += ai * bv[j]
    return out


def horner(c, x):
    cdef double[:] cv = np.ascontiguousarray(c, dtype=np.float64).reshape(-1)
    xa = np.asarray(x, dtype=np.float64)
    flat = np.ascontiguousarray(xa).reshape(-1)
    res = np.empty_like(flat)
    cdef double[:] xv = flat
    cdef double[:] rv = res
    cdef Py_ssize_t i, k, n = xv.shape[0], m = cv.shape[0]
    cdef double acc, xi
    for i in range(n):
        xi = xv[i]
        acc = 0.0
        for k in range(m - 1, -1, -1):
            acc = acc * xi + cv[k]
        rv[i] = acc
    return res.reshape(xa.shape)


def shift_axis(a, Py_ssize_t axis, double h):
    a = np.require(a, np.float64, "C")
    cdef Py_ssize_t n = a.shape[axis]
    if n <= 1 or h == 0.0:
        return a.copy()
    moved = np.ascontiguousarray(np.moveaxis(a, axis, -1))
    work = moved.reshape(-1, n).copy()
    cdef double[:, :] w = work
    cdef Py_ssize_t r, i, k, rows = w.shape[0]
    # repeated synthetic division (Horner's shift)
    for r in range(rows):
        for i in range(n - 1):
            for k in range(n - 2, i - 1, -1):
                w[r, k] += h * w[r, k + 1]
    res = work.reshape(moved.shape)
    return np.ascontiguousarray(np.moveaxis(res, -1, axis))


cdef inline double _h(double[:] c, double x) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(c.shape[0] - 1, -1, -1):
        acc = acc * x + c[k]
    return acc


cdef inline double _hd(double[:] c, double x) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t k
    for k in range(c.shape[0] - 1, 0, -1):
        acc = acc * x + k * c[k]
    return acc


def refine_root(c, double lo, double hi, double tol):
    cdef double[:] cv = np.ascontiguousarray(c, dtype=np.float64).reshape(-1)
    cdef double flo = _h(cv, lo), fhi = _h(cv, hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    cdef double x = 0.5 * (lo + hi), fx, d, xn, cand
    cdef double fprev = 1e308
    cdef int it
    for it in range(300):
        fx = _h(cv, x)
        if fx == 0.0:
            return x
        if (fx < 0.0) == (flo < 0.0):
            lo = x
            flo = fx
        else:
            hi = x
        if hi - lo <= tol * (1.0 + fabs(x)):
            return 0.5 * (lo + hi)
        xn = 0.5 * (lo + hi)
        if fabs(fx) < 0.5 * fprev:
            d = _hd(cv, x)
            if d != 0.0:
                cand = x - fx / d
                if lo < cand < hi:
                    xn = cand
        fprev = fabs(fx)
        if fabs(xn - x) <= tol * (1.0 + fabs(x)):
            return xn
        x = xn
    return x
