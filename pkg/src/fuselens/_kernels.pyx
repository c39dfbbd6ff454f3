# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: pairwise semantic-loss sum and MEF-SSIM patch terms.

Both kernels release the GIL and sum in a fixed order, so repeated calls on
the same inputs are bit-identical.
"""

import numpy as np

from libc.math cimport fabs


cdef inline double _pair(double ai, double bi, double yi,
                         double aj, double bj, double yj) noexcept nogil:
    cdef double da = fabs(ai - aj)
    cdef double db = fabs(bi - bj)
    cdef double dy = fabs(yi - yj)
    cdef double u = fabs(da - dy)
    cdef double v = fabs(db - dy)
    return u if u > v else v


cdef double _sl_sum(const double* a, const double* b, const double* y,
                    Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i = 0, j, p, q
    cdef double total = 0.0
    cdef double a0, a1, a2, a3, b0, b1, b2, b3, y0, y1, y2, y3
    cdef double s0, s1, s2, s3, aj, bj, yj
    # four rows share one pass over the column stream
    while i + 4 <= m:
        a0 = a[i]; a1 = a[i + 1]; a2 = a[i + 2]; a3 = a[i + 3]
        b0 = b[i]; b1 = b[i + 1]; b2 = b[i + 2]; b3 = b[i + 3]
        y0 = y[i]; y1 = y[i + 1]; y2 = y[i + 2]; y3 = y[i + 3]
        s0 = 0.0; s1 = 0.0; s2 = 0.0; s3 = 0.0
        for p in range(i, i + 4):
            for q in range(p + 1, i + 4):
                s0 += _pair(a[p], b[p], y[p], a[q], b[q], y[q])
        for j in range(i + 4, m):
            aj = a[j]; bj = b[j]; yj = y[j]
            s0 += _pair(a0, b0, y0, aj, bj, yj)
            s1 += _pair(a1, b1, y1, aj, bj, yj)
            s2 += _pair(a2, b2, y2, aj, bj, yj)
            s3 += _pair(a3, b3, y3, aj, bj, yj)
        total += (s0 + s1) + (s2 + s3)
        i += 4
    while i < m:
        s0 = 0.0
        for j in range(i + 1, m):
            s0 += _pair(a[i], b[i], y[i], a[j], b[j], y[j])
        total += s0
        i += 1
    return total


cdef double _sl_sum_grad(const double* a, const double* b, const double* y,
                         double* g, Py_ssize_t m) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double total = 0.0
    cdef double ai, bi, yi, s, gi, d, dy, u, v, au, av, w, t, gij
    cdef bint pick_ct
    for i in range(m):
        ai = a[i]; bi = b[i]; yi = y[i]
        s = 0.0
        gi = 0.0
        for j in range(i + 1, m):
            d = yi - y[j]
            dy = fabs(d)
            u = fabs(ai - a[j]) - dy
            v = fabs(bi - b[j]) - dy
            au = fabs(u)
            av = fabs(v)
            # ties resolve to the ct term
            pick_ct = au >= av
            t = au if pick_ct else av
            w = u if pick_ct else v
            s += t
            gij = -(<double>((w > 0) - (w < 0))) * (<double>((d > 0) - (d < 0)))
            gi += gij
            g[j] -= gij
        g[i] += gi
        total += s
    return total


def sl_pairwise(a, b, y, bint want_grad=False):
    """Sum over i<j of max_k | |k_i - k_j| - |y_i - y_j| | for k in (a, b).

    Returns ``(total, grad)`` where ``grad`` is d(total)/dy, or None.
    """
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    if not (av.shape[0] == bv.shape[0] == yv.shape[0]):
        raise ValueError("a, b and y must have equal length")
    cdef Py_ssize_t m = av.shape[0]
    cdef double total
    cdef double[::1] gv
    if m == 0:
        return 0.0, (np.zeros(0) if want_grad else None)
    if not want_grad:
        with nogil:
            total = _sl_sum(&av[0], &bv[0], &yv[0], m)
        return total, None
    grad = np.zeros(m, dtype=np.float64)
    gv = grad
    with nogil:
        total = _sl_sum_grad(&av[0], &bv[0], &yv[0], &gv[0], m)
    return total, grad


def mef_patch_terms(const double[:, ::1] target, const double[:, ::1] y,
                    Py_ssize_t rows, Py_ssize_t cols, Py_ssize_t size,
                    Py_ssize_t stride, double c, bint want_grad=False):
    """Sum of per-patch scores (2 cov + c) / (var_t + var_y + c).

    Each score is evaluated as ``1 - mean((dt - dy)**2) / den``, which is the
    same quantity but cannot round above 1.

    ``target`` holds one desired patch per grid position (row-major, each
    flattened row-major). Returns ``(score_sum, grad)`` with ``grad`` the
    gradient of the score sum with respect to ``y``, or None.
    """
    cdef Py_ssize_t n = size * size
    if target.shape[0] != rows * cols or target.shape[1] != n:
        raise ValueError("target shape does not match the patch grid")
    if (rows - 1) * stride + size > y.shape[0] or (cols - 1) * stride + size > y.shape[1]:
        raise ValueError("patch grid exceeds image bounds")
    grad = np.zeros((y.shape[0], y.shape[1]), dtype=np.float64)
    cdef double[:, ::1] gv = grad
    cdef Py_ssize_t p, r0, c0, u, v, k
    cdef double inv_n = 1.0 / n
    cdef double sx, sy, mx, my, dx, dyv, vx, vy, dd, num, den, ca, cb, total = 0.0
    with nogil:
        for p in range(rows * cols):
            r0 = (p // cols) * stride
            c0 = (p % cols) * stride
            sx = 0.0
            sy = 0.0
            for u in range(size):
                for v in range(size):
                    sx += target[p, u * size + v]
                    sy += y[r0 + u, c0 + v]
            mx = sx * inv_n
            my = sy * inv_n
            vx = 0.0
            vy = 0.0
            dd = 0.0
            for u in range(size):
                for v in range(size):
                    dx = target[p, u * size + v] - mx
                    dyv = y[r0 + u, c0 + v] - my
                    vx += dx * dx
                    vy += dyv * dyv
                    dd += (dx - dyv) * (dx - dyv)
            vx *= inv_n
            vy *= inv_n
            dd *= inv_n
            den = vx + vy + c
            num = den - dd
            total += 1.0 - dd / den
            if want_grad:
                ca = 2.0 * inv_n / den
                cb = 2.0 * inv_n * num / (den * den)
                for u in range(size):
                    for v in range(size):
                        k = u * size + v
                        gv[r0 + u, c0 + v] += ca * (target[p, k] - mx) - cb * (y[r0 + u, c0 + v] - my)
    return total, (grad if want_grad else None)
