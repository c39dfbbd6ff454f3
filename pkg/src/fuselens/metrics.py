"""Fusion quality indices: SSIM, normalized mutual information (Q_MI),
Xydeas-Petrovic edge preservation (Q^AB/F) and the semantic-loss index.

All indices use valid windows only (no border padding).
"""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from . import config
from .errors import DimensionError
from .image import PatchSpec, pixels, require_same_shape
from .losses.semantic import SemanticTerm

log = logging.getLogger(__name__)

SL_METRIC_SPEC = PatchSpec(config.SL_METRIC_PATCH, config.SL_METRIC_STRIDE, config.BACKGROUND_THRESHOLD)

# Xydeas-Petrovic sigmoid constants (edge strength, orientation)
QABF_GAMMA_G, QABF_KAPPA_G, QABF_SIGMA_G = 0.9994, -15.0, 0.5
QABF_GAMMA_A, QABF_KAPPA_A, QABF_SIGMA_A = 0.9879, -22.0, 0.8

_SOBEL_SMOOTH = np.array([1.0, 2.0, 1.0])
_SOBEL_DIFF = np.array([-1.0, 0.0, 1.0])


@dataclass(frozen=True)
class MetricReport:
    q_mi: float
    q_abf: float
    ssim_ct: float
    ssim_mr: float
    sl: float

    FIELDS = ("q_mi", "q_abf", "ssim_ct", "ssim_mr", "sl")

    def to_dict(self):
        return asdict(self)


def gaussian_window(size=config.SSIM_WINDOW, sigma=config.SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _valid_filter(arr, kernel):
    """Separable 2-D correlation keeping only fully-covered positions."""
    half = len(kernel) // 2
    out = correlate1d(arr, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    lo, hi = half, len(kernel) - 1 - half
    return out[lo : arr.shape[0] - hi, lo : arr.shape[1] - hi]


def ssim_map(a, b, window=config.SSIM_WINDOW, sigma=config.SSIM_SIGMA,
             k1=config.SSIM_K1, k2=config.SSIM_K2, data_range=1.0) -> np.ndarray:
    a, b = pixels(a), pixels(b)
    require_same_shape(a, b)
    if min(a.shape) < window:
        raise DimensionError(f"image side {min(a.shape)} smaller than SSIM window {window}")
    g = gaussian_window(window, sigma)
    c1, c2 = (k1 * data_range) ** 2, (k2 * data_range) ** 2
    mu_a, mu_b = _valid_filter(a, g), _valid_filter(b, g)
    var_a = _valid_filter(a * a, g) - mu_a * mu_a
    var_b = _valid_filter(b * b, g) - mu_b * mu_b
    cov = _valid_filter(a * b, g) - mu_a * mu_b
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))


def ssim_index(a, b) -> float:
    """Mean SSIM over 11x11 Gaussian windows (sigma 1.5), stride 1."""
    return float(np.mean(ssim_map(a, b)))


def _quantize_bins(arr, bins):
    return np.minimum((arr * bins).astype(np.int64), bins - 1)


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log2(p)))


def _normalized_mi(src, fused, bins):
    """I(src; fused) / (H(src) + H(fused)), 0.5 for an identical constant image."""
    qs, qf = _quantize_bins(src, bins), _quantize_bins(fused, bins)
    joint = np.bincount((qs * bins + qf).ravel(), minlength=bins * bins)
    h_s = _entropy(np.bincount(qs.ravel(), minlength=bins))
    h_f = _entropy(np.bincount(qf.ravel(), minlength=bins))
    h_joint = _entropy(joint)
    denom = h_s + h_f
    if denom == 0.0:
        return 0.5 if np.array_equal(src, fused) else 0.0
    return (h_s + h_f - h_joint) / denom


def q_mi(x, y, bins=config.MI_BINS) -> float:
    """Sum over sources of mutual information normalized by the entropy sum.

    A fused image identical to both sources scores 1.0.
    """
    require_same_shape(x.ct, x.mr, y)
    y = pixels(y)
    return _normalized_mi(pixels(x.ct), y, bins) + _normalized_mi(pixels(x.mr), y, bins)


def sobel_strength_orientation(img):
    """Sobel edge strength and orientation on the valid interior."""
    arr = pixels(img)
    if min(arr.shape) < 3:
        raise DimensionError(f"image side {min(arr.shape)} too small for 3x3 Sobel")
    gx = correlate1d(correlate1d(arr, _SOBEL_DIFF, axis=1), _SOBEL_SMOOTH, axis=0)[1:-1, 1:-1]
    gy = correlate1d(correlate1d(arr, _SOBEL_DIFF, axis=0), _SOBEL_SMOOTH, axis=1)[1:-1, 1:-1]
    strength = np.hypot(gx, gy)
    with np.errstate(divide="ignore", invalid="ignore"):
        orientation = np.where(gx == 0, math.pi / 2, np.arctan(gy / gx))
    return strength, orientation


def edge_preservation(g_src, a_src, g_fused, a_fused):
    """Per-pixel preservation Q^{SF} of source edges in the fused image."""
    hi = np.maximum(g_src, g_fused)
    lo = np.minimum(g_src, g_fused)
    rel_strength = np.divide(lo, hi, out=np.zeros_like(hi), where=hi > 0)
    rel_orient = 1.0 - np.abs(a_src - a_fused) / (math.pi / 2)
    q_g = QABF_GAMMA_G / (1.0 + np.exp(QABF_KAPPA_G * (rel_strength - QABF_SIGMA_G)))
    q_a = QABF_GAMMA_A / (1.0 + np.exp(QABF_KAPPA_A * (rel_orient - QABF_SIGMA_A)))
    return q_g * q_a


def q_abf(x, y) -> float:
    """Xydeas-Petrovic edge-preservation index, weighted by source edge strength.

    Returns 0 when neither source has any edge.
    """
    require_same_shape(x.ct, x.mr, y)
    g_a, a_a = sobel_strength_orientation(x.ct)
    g_b, a_b = sobel_strength_orientation(x.mr)
    g_f, a_f = sobel_strength_orientation(y)
    denom = float(np.sum(g_a + g_b))
    if denom == 0.0:
        log.info("q_abf: both sources are flat, no edges to preserve")
        return 0.0
    q_af = edge_preservation(g_a, a_a, g_f, a_f)
    q_bf = edge_preservation(g_b, a_b, g_f, a_f)
    return float(np.sum(q_af * g_a + q_bf * g_b)) / denom


def sl_metric(x, y, spec: PatchSpec = SL_METRIC_SPEC) -> float:
    require_same_shape(x.ct, x.mr, y)
    return SemanticTerm(x, spec)(y)[0]


def evaluate_all(x, y) -> MetricReport:
    require_same_shape(x.ct, x.mr, y)
    return MetricReport(
        q_mi=q_mi(x, y),
        q_abf=q_abf(x, y),
        ssim_ct=ssim_index(y, x.ct),
        ssim_mr=ssim_index(y, x.mr),
        sl=sl_metric(x, y),
    )
