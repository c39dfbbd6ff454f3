from .composite import LossReport, LossWeights, Objective, composite_loss, reconstruct_loss
from .mef_ssim import (
    MEF_SPEC,
    MefTerm,
    PatchDecomposition,
    decompose_patch,
    desired_patch,
    desired_patches,
    mef_score,
    mef_ssim_grad,
    mef_ssim_loss,
    structure_consistency,
)
from .semantic import SL_SPEC, SemanticTerm, pair_patch_means, semantic_loss, semantic_loss_grad

__all__ = [
    "LossReport",
    "LossWeights",
    "MEF_SPEC",
    "MefTerm",
    "Objective",
    "PatchDecomposition",
    "SL_SPEC",
    "SemanticTerm",
    "composite_loss",
    "decompose_patch",
    "desired_patch",
    "desired_patches",
    "mef_score",
    "mef_ssim_grad",
    "mef_ssim_loss",
    "pair_patch_means",
    "reconstruct_loss",
    "semantic_loss",
    "semantic_loss_grad",
    "structure_consistency",
]
