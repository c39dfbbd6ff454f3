"""Reconstruction loss and the weighted composite objective."""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .. import config
from ..errors import InputError
from ..image import PatchSpec, pixels, require_same_shape
from .mef_ssim import MEF_SPEC, MefTerm
from .semantic import SL_SPEC, SemanticTerm


@dataclass(frozen=True)
class LossWeights:
    alpha: float = config.ALPHA
    beta: float = config.BETA

    def __post_init__(self):
        if not (self.alpha >= 0 and self.beta >= 0):
            raise InputError(f"loss weights must be non-negative, got {self.alpha}, {self.beta}")


@dataclass(frozen=True)
class LossReport:
    sl: float
    mef_ssim: float
    composite: float
    weights: LossWeights
    reconstruct: Optional[float] = None

    def to_dict(self):
        out = asdict(self)
        if self.reconstruct is None:
            del out["reconstruct"]
        return out


def reconstruct_loss(x, x_hat) -> float:
    """Sum of the l2 norms of the ct and mr reconstruction residuals."""
    require_same_shape(x.ct, x.mr, x_hat.ct, x_hat.mr)
    return float(
        np.linalg.norm(pixels(x_hat.mr) - pixels(x.mr))
        + np.linalg.norm(pixels(x_hat.ct) - pixels(x.ct))
    )


class Objective:
    """Composite loss over the fused image with source terms precomputed.

    The reconstruction term does not depend on the fused image, so it enters
    the reported value but never the gradient.
    """

    def __init__(self, x, weights: LossWeights = LossWeights(), sl_spec: PatchSpec = SL_SPEC,
                 mef_spec: PatchSpec = MEF_SPEC, mef_c: float = config.MEF_C, x_hat=None):
        self.weights = weights
        self.semantic = SemanticTerm(x, sl_spec)
        self.mef = MefTerm(x, mef_spec, mef_c)
        self.reconstruct = None if x_hat is None else reconstruct_loss(x, x_hat)

    def __call__(self, y, want_grad=False):
        w = self.weights
        sl, g_sl = self.semantic(y, want_grad and w.alpha != 0)
        mef, g_mef = self.mef(y, want_grad and w.beta != 0)
        composite = w.alpha * sl + w.beta * mef
        if self.reconstruct is not None:
            composite = self.reconstruct + composite
        report = LossReport(sl, mef, composite, w, self.reconstruct)
        if not want_grad:
            return report, None
        grad = np.zeros(self.semantic.shape)
        if g_sl is not None:
            grad += w.alpha * g_sl
        if g_mef is not None:
            grad += w.beta * g_mef
        return report, grad


def composite_loss(x, y, weights: LossWeights = LossWeights(), sl_spec: PatchSpec = SL_SPEC,
                   mef_spec: PatchSpec = MEF_SPEC, x_hat=None, want_grad=False):
    """Evaluate the composite objective at ``y``.

    Returns a :class:`LossReport`, or ``(report, grad)`` when ``want_grad``.
    """
    require_same_shape(x.ct, x.mr, y)
    report, grad = Objective(x, weights, sl_spec, mef_spec, x_hat=x_hat)(y, want_grad)
    return (report, grad) if want_grad else report
