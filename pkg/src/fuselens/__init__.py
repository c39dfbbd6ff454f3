"""Semantic-aware fusion of registered CT/MR images.

Losses (semantic loss, MEF-SSIM, composite objective) with analytic
gradients, a pixel-space optimizer that minimizes them, classical
baselines, and fusion quality metrics.
"""

from .errors import DimensionError, DivergenceError, FuseLensError, InputError, OutputError, ShapeError
from .fuse import FusionResult, OptimConfig, fuse_average, fuse_laplacian, fuse_variational
from .image import (
    GrayImage,
    PatchMeanGrid,
    PatchSpec,
    RegisteredPair,
    load_image,
    patch_means,
    save_image,
    to_luma,
)
from .kernels import BACKEND
from .losses import (
    LossReport,
    LossWeights,
    composite_loss,
    decompose_patch,
    desired_patch,
    mef_score,
    mef_ssim_grad,
    mef_ssim_loss,
    reconstruct_loss,
    semantic_loss,
    semantic_loss_grad,
    structure_consistency,
)
from .metrics import MetricReport, evaluate_all, q_abf, q_mi, sl_metric, ssim_index
from .phantom import make_phantom

__version__ = "0.1.0"
