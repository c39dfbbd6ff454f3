"""Semantic loss: inter-patch brightness differences in the fused image
should track the larger corresponding difference in either source.

For kept (non-background) patches i < j with means ``ct_i``, ``mr_i`` and
``y_i``, each pair contributes

    max(| |ct_i - ct_j| - |y_i - y_j| |, | |mr_i - mr_j| - |y_i - y_j| |)

and the sum is divided by ``M (M + 1) / 2`` where ``M`` is the number of kept
patches. A patch is background when both source means fall below
``spec.background_threshold``.
"""

import numpy as np

from .. import config, kernels
from ..errors import ShapeError
from ..image import PatchMeanGrid, PatchSpec, patch_means, pixels, require_same_shape, scatter_patch_values

SL_SPEC = PatchSpec(config.SL_PATCH, config.SL_STRIDE, config.BACKGROUND_THRESHOLD)


def background_mask(ct_means, mr_means, threshold):
    return np.maximum(ct_means, mr_means) < threshold


def pair_patch_means(x, y, spec: PatchSpec):
    """Patch-mean grids of ct, mr and y, all carrying the shared background mask."""
    require_same_shape(x.ct, x.mr, y)
    grids = [patch_means(img, spec) for img in (x.ct, x.mr, y)]
    mask = background_mask(grids[0].means, grids[1].means, spec.background_threshold)
    return tuple(PatchMeanGrid(g.rows, g.cols, g.means, mask) for g in grids)


def normalizer(kept: int) -> float:
    return kept * (kept + 1) / 2.0


class SemanticTerm:
    """Semantic loss with the source-side patch statistics precomputed."""

    def __init__(self, x, spec: PatchSpec = SL_SPEC):
        self.spec = spec
        self.shape = x.shape
        ct, mr = patch_means(x.ct, spec), patch_means(x.mr, spec)
        self.rows, self.cols = ct.rows, ct.cols
        self.keep = ~background_mask(ct.means, mr.means, spec.background_threshold)
        self.ct_means = np.ascontiguousarray(ct.means[self.keep])
        self.mr_means = np.ascontiguousarray(mr.means[self.keep])
        self.kept = int(self.keep.sum())

    def __call__(self, y, want_grad=False):
        """Return ``(loss, grad)``; ``grad`` is None unless requested."""
        y = pixels(y)
        if y.shape != self.shape:
            raise ShapeError(f"fused shape {y.shape} != source shape {self.shape}")
        if self.kept < 2:
            return 0.0, (np.zeros(self.shape) if want_grad else None)
        y_means = np.ascontiguousarray(patch_means(y, self.spec).means[self.keep])
        total, g_means = kernels.sl_pairwise(self.ct_means, self.mr_means, y_means, want_grad)
        scale = 1.0 / normalizer(self.kept)
        loss = total * scale
        if not want_grad:
            return loss, None
        per_patch = np.zeros((self.rows, self.cols))
        per_patch[self.keep] = g_means * scale
        n = self.spec.size * self.spec.size
        spread = np.repeat(per_patch.reshape(-1, 1) / n, n, axis=1)
        return loss, scatter_patch_values(spread, self.shape, self.spec)


def semantic_loss(x, y, spec: PatchSpec = SL_SPEC) -> float:
    require_same_shape(x.ct, x.mr, y)
    return SemanticTerm(x, spec)(y)[0]


def semantic_loss_grad(x, y, spec: PatchSpec = SL_SPEC) -> np.ndarray:
    """Subgradient of :func:`semantic_loss` with respect to the fused image.

    Conventions: ``sign(0) = 0``; when both sources' terms are equally large
    the ct term is used. Each patch-mean gradient is spread uniformly over
    the patch's pixels and summed where patches overlap.
    """
    require_same_shape(x.ct, x.mr, y)
    return SemanticTerm(x, spec)(y, want_grad=True)[1]
