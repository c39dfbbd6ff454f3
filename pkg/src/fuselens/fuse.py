"""Image fusion: pixel-space optimization of the composite objective, plus
averaging and Laplacian-pyramid baselines."""

import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.ndimage import correlate1d

from . import config
from .errors import DimensionError, DivergenceError, InputError
from .image import GrayImage, PatchSpec, pixels
from .losses import LossReport, LossWeights, Objective
from .losses.mef_ssim import MEF_SPEC
from .losses.semantic import SL_SPEC

log = logging.getLogger(__name__)

INITS = ("average", "ct", "mr")

_BINOMIAL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def fuse_average(x) -> GrayImage:
    return GrayImage.clipped((pixels(x.ct) + pixels(x.mr)) / 2.0)


def _blur(arr):
    out = correlate1d(arr, _BINOMIAL, axis=0, mode="reflect")
    return correlate1d(out, _BINOMIAL, axis=1, mode="reflect")


def _reduce(arr):
    return _blur(arr)[::2, ::2]


def _expand(arr, shape):
    up = np.zeros(shape)
    up[::2, ::2] = arr
    return 4.0 * _blur(up)


def laplacian_pyramid(arr, levels):
    """Band-pass levels (finest first) and the coarse residual.

    ``levels`` counts every level including the residual, so ``levels=1``
    returns no band-pass levels and the image itself as residual.
    """
    bands = []
    current = np.asarray(arr, dtype=np.float64)
    for _ in range(levels - 1):
        smaller = _reduce(current)
        bands.append(current - _expand(smaller, current.shape))
        current = smaller
    return bands, current


def reconstruct_pyramid(bands, residual):
    img = residual
    for band in reversed(bands):
        img = _expand(img, band.shape) + band
    return img


def fuse_laplacian(x, levels: int = 4) -> GrayImage:
    """Max-absolute band-pass selection (ct wins ties), averaged residual."""
    if int(levels) != levels or levels < 1:
        raise InputError(f"levels must be a positive integer, got {levels}")
    if min(x.shape) < 2 ** levels:
        raise DimensionError(f"image side {min(x.shape)} too small for {levels} pyramid levels")
    bands_ct, res_ct = laplacian_pyramid(pixels(x.ct), levels)
    bands_mr, res_mr = laplacian_pyramid(pixels(x.mr), levels)
    bands = [np.where(np.abs(a) >= np.abs(b), a, b) for a, b in zip(bands_ct, bands_mr)]
    return GrayImage.clipped(reconstruct_pyramid(bands, (res_ct + res_mr) / 2.0))


@dataclass(frozen=True)
class OptimConfig:
    weights: LossWeights = field(default_factory=LossWeights)
    sl_spec: PatchSpec = SL_SPEC
    mef_spec: PatchSpec = MEF_SPEC
    mef_c: float = config.MEF_C
    learning_rate: float = config.LEARNING_RATE
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    eps: float = config.ADAM_EPS
    max_iters: int = config.MAX_ITERS
    tol: float = config.TOL
    init: str = "average"
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError(f"learning_rate must be positive, got {self.learning_rate}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise InputError(f"max_iters must be a positive integer, got {self.max_iters}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InputError("beta1 and beta2 must lie strictly between 0 and 1")
        if not (self.eps > 0 and self.tol >= 0 and self.mef_c > 0):
            raise InputError("eps and mef_c must be positive, tol non-negative")
        if self.init not in INITS:
            raise InputError(f"init must be one of {INITS}, got {self.init!r}")


@dataclass
class FusionResult:
    fused: GrayImage
    loss_trace: List[LossReport]
    iterations_run: int
    converged: bool

    @property
    def initial(self) -> LossReport:
        return self.loss_trace[0]

    @property
    def final(self) -> LossReport:
        return self.loss_trace[-1]


def _initial_image(x, init):
    if init == "ct":
        return pixels(x.ct).copy()
    if init == "mr":
        return pixels(x.mr).copy()
    return (pixels(x.ct) + pixels(x.mr)) / 2.0


def _check_finite(report, grad, iteration):
    if not (math.isfinite(report.composite) and np.all(np.isfinite(grad))):
        raise DivergenceError(iteration)


def fuse_variational(x, cfg: OptimConfig = OptimConfig()) -> FusionResult:
    """Minimize ``alpha * SL + beta * (1 - MEF-SSIM)`` directly over the fused pixels.

    Adam steps, each followed by projection onto [0, 1]. ``loss_trace[0]``
    is the loss at initialization and ``loss_trace[t]`` the loss after step
    ``t``. Stops after ``max_iters`` steps or once the composite changes by
    less than ``tol`` in one step. ``seed`` is carried for provenance; every
    current initialization is deterministic.
    """
    objective = Objective(x, cfg.weights, cfg.sl_spec, cfg.mef_spec, cfg.mef_c)
    y = _initial_image(x, cfg.init)
    report, grad = objective(y, want_grad=True)
    _check_finite(report, grad, 0)
    trace = [report]
    m = np.zeros_like(y)
    v = np.zeros_like(y)
    converged = False
    step = 0
    for step in range(1, cfg.max_iters + 1):
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
        m_hat = m / (1.0 - cfg.beta1 ** step)
        v_hat = v / (1.0 - cfg.beta2 ** step)
        y = np.clip(y - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps), 0.0, 1.0)
        report, grad = objective(y, want_grad=True)
        _check_finite(report, grad, step)
        trace.append(report)
        if abs(report.composite - trace[-2].composite) < cfg.tol:
            converged = True
            break
    log.debug("variational fusion: %d steps, composite %.6g -> %.6g",
              step, trace[0].composite, trace[-1].composite)
    return FusionResult(GrayImage(y), trace, step, converged)
