"""Synthetic registered CT/MR-like head slices with opposing brightness
semantics: bone is bright in CT and dark in MR, fluid the reverse.

All slices share one anatomy template; the slice index perturbs it slightly.
Output is fully determined by ``(seed, index, size)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .image import GrayImage, RegisteredPair

# (ct, mr) intensity per tissue class
TISSUE = {
    "background": (0.0, 0.0),
    "bone": (0.92, 0.08),
    "brain": (0.38, 0.48),
    "fluid": (0.08, 0.90),
    "calcification": (0.97, 0.48),
    "lesion": (0.38, 0.72),
}
NOISE_SIGMA = 0.012
MIN_SIZE = 32


@dataclass(frozen=True)
class PhantomMasks:
    head: np.ndarray
    bone: np.ndarray
    fluid: np.ndarray
    calcification: np.ndarray
    lesion: np.ndarray


def _ellipse(yy, xx, cy, cx, ry, rx):
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def phantom_masks(size: int, rng: np.random.Generator) -> PhantomMasks:
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1.0)
    cy, cx = 0.5 + rng.uniform(-0.02, 0.02, size=2)
    ry, rx = 0.42 + rng.uniform(-0.02, 0.02), 0.35 + rng.uniform(-0.02, 0.02)
    head = _ellipse(yy, xx, cy, cx, ry, rx)
    inner = _ellipse(yy, xx, cy, cx, ry - 0.07, rx - 0.07)
    bone = head & ~inner

    v_ry, v_rx = 0.11 + rng.uniform(-0.02, 0.02), 0.05 + rng.uniform(-0.01, 0.01)
    spread = 0.08 + rng.uniform(-0.01, 0.01)
    fluid = _ellipse(yy, xx, cy, cx - spread, v_ry, v_rx) | _ellipse(yy, xx, cy, cx + spread, v_ry, v_rx)
    fluid &= inner

    calc = _ellipse(yy, xx, cy - 0.2, cx + 0.12 + rng.uniform(-0.02, 0.02), 0.035, 0.035) & inner
    lesion = _ellipse(yy, xx, cy + 0.22, cx - 0.1 + rng.uniform(-0.02, 0.02), 0.05, 0.07) & inner
    return PhantomMasks(head, bone, fluid & ~calc, calc, lesion & ~fluid & ~calc)


def make_phantom(size: int = 256, seed: int = 0, index: int = 0) -> RegisteredPair:
    if size < MIN_SIZE:
        raise InputError(f"phantom size must be at least {MIN_SIZE}, got {size}")
    rng = np.random.default_rng([seed, index])
    masks = phantom_masks(size, rng)
    images = []
    for channel in (0, 1):
        img = np.full((size, size), TISSUE["background"][channel])
        img[masks.head] = TISSUE["brain"][channel]
        for name in ("bone", "fluid", "calcification", "lesion"):
            img[getattr(masks, name)] = TISSUE[name][channel]
        noise = rng.normal(0.0, NOISE_SIGMA, size=img.shape)
        img = np.where(masks.head, img + noise, img)
        images.append(GrayImage.clipped(img))
    return RegisteredPair(*images)


def phantom_set(count: int, size: int = 256, seed: int = 0):
    return [make_phantom(size, seed, i) for i in range(count)]
