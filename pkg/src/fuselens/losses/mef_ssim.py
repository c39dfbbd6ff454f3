"""MEF-SSIM: score each fused patch against a desired patch synthesized
from the two sources.

Every source patch splits into contrast (norm of the mean-removed patch),
structure (the unit direction of the mean-removed patch) and luminance (its
mean). The desired patch takes the larger source contrast and a structure
blended by contrast-power weights, where the power grows with the
directional agreement ``R`` of the two mean-removed patches. The fused patch
is then compared with an SSIM-style contrast/structure score.
"""

import math
from dataclasses import dataclass

import numpy as np

from .. import config, kernels
from ..errors import ShapeError
from ..image import PatchSpec, extract_patches, pixels, require_same_shape

MEF_SPEC = PatchSpec(config.MEF_PATCH, config.MEF_STRIDE, 0.0)

EPS = 1e-12
R_ONE_TOL = 1e-9
MAX_POWER = 20.0


@dataclass(frozen=True)
class PatchDecomposition:
    contrast: float
    structure: np.ndarray
    luminance: float

    def reconstruct(self) -> np.ndarray:
        return self.contrast * self.structure + self.luminance


def decompose_patch(p) -> PatchDecomposition:
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("empty patch")
    mean = float(p.mean())
    centered = p - mean
    c = float(np.linalg.norm(centered))
    s = centered / c if c > EPS else np.zeros_like(centered)
    return PatchDecomposition(c, s, mean)


def structure_consistency(centered_ct, centered_mr) -> float:
    """Directional agreement of two mean-removed patches, in [0, 1]."""
    a = np.asarray(centered_ct, dtype=np.float64).ravel()
    b = np.asarray(centered_mr, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("patches differ in length")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= EPS and nb <= EPS:
        return 1.0
    return float(min(1.0, np.linalg.norm(a + b) / (na + nb)))


def _blend_weights(c_ct, c_mr, r):
    """Structure weights ``c_k ** p`` with ``p = tan(pi R / 2)`` capped.

    Weights are divided by ``max(c) ** p``: the blend only uses their ratio,
    and this keeps low-contrast patches from underflowing to zero.
    """
    if abs(r - 1.0) <= R_ONE_TOL:
        return (1.0, 0.0) if c_ct >= c_mr else (0.0, 1.0)
    power = min(math.tan(math.pi * r / 2.0), MAX_POWER)
    c_max = max(c_ct, c_mr)
    return tuple((c / c_max) ** power if c > EPS else 0.0 for c in (c_ct, c_mr))


def desired_patch(p_ct, p_mr) -> np.ndarray:
    """Mean-removed target patch: max contrast times the blended structure."""
    d_ct, d_mr = decompose_patch(p_ct), decompose_patch(p_mr)
    if d_ct.structure.shape != d_mr.structure.shape:
        raise ValueError("patches differ in length")
    c_hat = max(d_ct.contrast, d_mr.contrast)
    r = structure_consistency(d_ct.contrast * d_ct.structure, d_mr.contrast * d_mr.structure)
    w_ct, w_mr = _blend_weights(d_ct.contrast, d_mr.contrast, r)
    if w_ct + w_mr <= EPS:
        s_bar = (d_ct.structure + d_mr.structure) / 2.0
    else:
        s_bar = (w_ct * d_ct.structure + w_mr * d_mr.structure) / (w_ct + w_mr)
    norm = np.linalg.norm(s_bar)
    if norm <= EPS:
        return np.zeros_like(s_bar)
    return c_hat * s_bar / norm


def _score(target, p_y, c):
    n = target.size
    dx = target - target.mean()
    dy = p_y - p_y.mean()
    diff = dx - dy
    # (2 cov + c) / den rewritten as 1 - var(dx - dy) / den so it cannot round above 1
    den = float(dx @ dx) / n + float(dy @ dy) / n + c
    return 1.0 - float(diff @ diff) / n / den


def mef_score(p_ct, p_mr, p_y, c: float = config.MEF_C) -> float:
    """SSIM-style score of fused patch ``p_y`` against the desired patch."""
    p_y = np.asarray(p_y, dtype=np.float64).ravel()
    target = desired_patch(p_ct, p_mr)
    if target.shape != p_y.shape:
        raise ValueError("patches differ in length")
    return _score(target, p_y, c)


def desired_patches(patches_ct: np.ndarray, patches_mr: np.ndarray) -> np.ndarray:
    """Row-wise :func:`desired_patch` over ``(P, n)`` patch stacks."""
    x_ct = patches_ct - patches_ct.mean(axis=1, keepdims=True)
    x_mr = patches_mr - patches_mr.mean(axis=1, keepdims=True)
    c_ct = np.linalg.norm(x_ct, axis=1)
    c_mr = np.linalg.norm(x_mr, axis=1)
    c_hat = np.maximum(c_ct, c_mr)
    s_ct = np.divide(x_ct, c_ct[:, None], out=np.zeros_like(x_ct), where=c_ct[:, None] > EPS)
    s_mr = np.divide(x_mr, c_mr[:, None], out=np.zeros_like(x_mr), where=c_mr[:, None] > EPS)

    both_flat = (c_ct <= EPS) & (c_mr <= EPS)
    denom = np.where(both_flat, 1.0, c_ct + c_mr)
    r = np.where(both_flat, 1.0, np.minimum(1.0, np.linalg.norm(x_ct + x_mr, axis=1) / denom))

    near_one = np.abs(r - 1.0) <= R_ONE_TOL
    power = np.minimum(np.tan(np.pi * np.where(near_one, 0.0, r) / 2.0), MAX_POWER)
    safe_max = np.where(c_hat > EPS, c_hat, 1.0)
    w_ct = np.where(c_ct > EPS, (c_ct / safe_max) ** power, 0.0)
    w_mr = np.where(c_mr > EPS, (c_mr / safe_max) ** power, 0.0)
    ct_wins = c_ct >= c_mr
    w_ct = np.where(near_one, ct_wins.astype(float), w_ct)
    w_mr = np.where(near_one, (~ct_wins).astype(float), w_mr)

    w_sum = w_ct + w_mr
    degenerate = w_sum <= EPS
    s_bar = np.where(
        degenerate[:, None],
        (s_ct + s_mr) / 2.0,
        (w_ct[:, None] * s_ct + w_mr[:, None] * s_mr) / np.where(degenerate, 1.0, w_sum)[:, None],
    )
    s_norm = np.linalg.norm(s_bar, axis=1)
    scale = np.divide(c_hat, s_norm, out=np.zeros_like(c_hat), where=s_norm > EPS)
    return s_bar * scale[:, None]


class MefTerm:
    """MEF-SSIM loss with the desired patches precomputed from the sources.

    The loss is one minus the mean patch score over the grid.
    """

    def __init__(self, x, spec: PatchSpec = MEF_SPEC, c: float = config.MEF_C):
        self.spec = spec
        self.c = c
        self.shape = x.shape
        self.rows, self.cols = spec.grid_shape(x.shape)
        self.targets = np.ascontiguousarray(
            desired_patches(extract_patches(x.ct, spec), extract_patches(x.mr, spec))
        )

    def __call__(self, y, want_grad=False):
        y = np.ascontiguousarray(pixels(y))
        if y.shape != self.shape:
            raise ShapeError(f"fused shape {y.shape} != source shape {self.shape}")
        count = self.rows * self.cols
        total, grad = kernels.mef_patch_terms(
            self.targets, y, self.rows, self.cols, self.spec.size, self.spec.stride,
            self.c, want_grad,
        )
        loss = 1.0 - total / count
        if want_grad:
            grad = grad * (-1.0 / count)
        return loss, grad


def mef_ssim_loss(x, y, spec: PatchSpec = MEF_SPEC, c: float = config.MEF_C) -> float:
    require_same_shape(x.ct, x.mr, y)
    return MefTerm(x, spec, c)(y)[0]


def mef_ssim_grad(x, y, spec: PatchSpec = MEF_SPEC, c: float = config.MEF_C) -> np.ndarray:
    require_same_shape(x.ct, x.mr, y)
    return MefTerm(x, spec, c)(y, want_grad=True)[1]
