"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and conventions; slower, but always importable.
"""

import numpy as np

from .image import PatchSpec, extract_patches, scatter_patch_values

# pair-matrix elements held in memory per block
_BLOCK_ELEMS = 1 << 21


def sl_pairwise(a, b, y, want_grad=False):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if not (a.shape[0] == b.shape[0] == y.shape[0]):
        raise ValueError("a, b and y must have equal length")
    m = a.shape[0]
    grad = np.zeros(m) if want_grad else None
    total = 0.0
    block = max(1, _BLOCK_ELEMS // max(m, 1))
    for i0 in range(0, m, block):
        i1 = min(m, i0 + block)
        # columns j >= i0 only; the strict upper triangle is masked below
        ai, bi, yi = a[i0:i1, None], b[i0:i1, None], y[i0:i1, None]
        aj, bj, yj = a[None, i0:], b[None, i0:], y[None, i0:]
        upper = np.arange(i0, m)[None, :] > np.arange(i0, i1)[:, None]
        d = yi - yj
        dy = np.abs(d)
        u = np.abs(ai - aj) - dy
        v = np.abs(bi - bj) - dy
        au, av = np.abs(u), np.abs(v)
        pick_ct = au >= av
        t = np.where(pick_ct, au, av)
        total += float(np.sum(t, where=upper))
        if want_grad:
            w = np.where(pick_ct, u, v)
            g = np.where(upper, -np.sign(w) * np.sign(d), 0.0)
            grad[i0:i1] += g.sum(axis=1)
            grad[i0:] -= g.sum(axis=0)
    return total, grad


def mef_patch_terms(target, y, rows, cols, size, stride, c, want_grad=False):
    y = np.ascontiguousarray(y, dtype=np.float64)
    spec = PatchSpec(size, stride, 0.0)
    if (rows - 1) * stride + size > y.shape[0] or (cols - 1) * stride + size > y.shape[1]:
        raise ValueError("patch grid exceeds image bounds")
    n = size * size
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (rows * cols, n):
        raise ValueError("target shape does not match the patch grid")
    yp = extract_patches(y[: (rows - 1) * stride + size, : (cols - 1) * stride + size], spec)
    dx = target - target.mean(axis=1, keepdims=True)
    dyv = yp - yp.mean(axis=1, keepdims=True)
    vx = np.einsum("ij,ij->i", dx, dx) / n
    vy = np.einsum("ij,ij->i", dyv, dyv) / n
    diff = dx - dyv
    dd = np.einsum("ij,ij->i", diff, diff) / n
    den = vx + vy + c
    num = den - dd  # == 2 cov + c
    total = float(np.sum(1.0 - dd / den))
    if not want_grad:
        return total, None
    ca = (2.0 / n) / den
    cb = (2.0 / n) * num / (den * den)
    coef = ca[:, None] * dx - cb[:, None] * dyv
    grad = np.zeros(y.shape)
    h, w = (rows - 1) * stride + size, (cols - 1) * stride + size
    grad[:h, :w] = scatter_patch_values(coef, (h, w), spec)
    return total, grad
