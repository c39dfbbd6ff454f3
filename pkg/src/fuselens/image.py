"""Grayscale image container, 8-bit file I/O and patch statistics.

Images are held as 2-D float64 arrays with intensities in [0, 1]. Patch
enumeration follows the "no overhang" rule: a patch grid over an image of
side ``L`` with patch ``size`` and ``stride`` has ``(L - size) // stride + 1``
positions along that side, and partial patches at the border are dropped.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from PIL import Image, UnidentifiedImageError

from .errors import DimensionError, InputError, OutputError, ShapeError

PathLike = Union[str, Path]

# BT.601 luma weights
LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_WRITE_FORMATS = {".png": "PNG", ".pgm": "PPM"}


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Immutable 2-D intensity grid, row-major, values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2 or arr.size == 0:
            raise InputError(f"expected a non-empty 2-D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InputError(
                f"intensities must lie in [0, 1], got [{arr.min():.6g}, {arr.max():.6g}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def clipped(cls, arr) -> "GrayImage":
        return cls(np.clip(arr, 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None

    def __repr__(self):
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class RegisteredPair:
    """Pixel-aligned CT-like and MR-like images of identical shape."""

    ct: GrayImage
    mr: GrayImage

    def __post_init__(self):
        for name in ("ct", "mr"):
            value = getattr(self, name)
            if not isinstance(value, GrayImage):
                object.__setattr__(self, name, GrayImage(value))
        if self.ct.shape != self.mr.shape:
            raise ShapeError(f"ct shape {self.ct.shape} != mr shape {self.mr.shape}")

    @property
    def shape(self):
        return self.ct.shape

    def swapped(self) -> "RegisteredPair":
        return RegisteredPair(self.mr, self.ct)


@dataclass(frozen=True)
class PatchSpec:
    """Square patch enumeration parameters.

    ``background_threshold`` is only consulted by the semantic loss: a patch
    is background when its mean is below the threshold in every source.
    """

    size: int
    stride: int
    background_threshold: float = 0.01

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 1:
            raise InputError(f"patch size must be a positive integer, got {self.size}")
        if int(self.stride) != self.stride or self.stride < 1:
            raise InputError(f"patch stride must be a positive integer, got {self.stride}")
        if not 0.0 <= self.background_threshold <= 1.0:
            raise InputError(
                f"background_threshold must lie in [0, 1], got {self.background_threshold}"
            )

    def grid_shape(self, shape):
        """Patch-grid ``(rows, cols)`` for an image of ``shape``."""
        height, width = shape
        if self.size > min(height, width):
            raise DimensionError(
                f"patch size {self.size} exceeds image side {min(height, width)}"
            )
        return (height - self.size) // self.stride + 1, (width - self.size) // self.stride + 1


@dataclass(frozen=True)
class PatchMeanGrid:
    rows: int
    cols: int
    means: np.ndarray
    background_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.background_mask is None:
            object.__setattr__(
                self, "background_mask", np.zeros((self.rows, self.cols), dtype=bool)
            )


def pixels(img) -> np.ndarray:
    """Float64 view of a GrayImage or array-like, without range validation."""
    if isinstance(img, GrayImage):
        return img.data
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"expected a 2-D image, got shape {arr.shape}")
    return arr


def require_same_shape(*images):
    shapes = {pixels(im).shape for im in images}
    if len(shapes) != 1:
        raise ShapeError(f"shape mismatch: {sorted(shapes)}")


def to_luma(r, g, b):
    """BT.601 luma of channel intensities in [0, 1], clamped to [0, 1]."""
    wr, wg, wb = LUMA_WEIGHTS
    y = wr * np.asarray(r, dtype=np.float64) + wg * np.asarray(g, dtype=np.float64) \
        + wb * np.asarray(b, dtype=np.float64)
    y = np.clip(y, 0.0, 1.0)
    return float(y) if y.ndim == 0 else y


def load_image(path: PathLike) -> GrayImage:
    """Read an 8-bit grayscale or RGB PGM/PNG into a GrayImage."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            fmt, mode = im.format, im.mode
            if fmt not in ("PNG", "PPM"):
                raise InputError(f"{path}: unsupported format {fmt!r} (expected PGM or PNG)")
            if mode == "L":
                return GrayImage(np.asarray(im, dtype=np.float64) / 255.0)
            if mode == "RGB":
                rgb = np.asarray(im, dtype=np.float64) / 255.0
                return GrayImage(to_luma(rgb[..., 0], rgb[..., 1], rgb[..., 2]))
            raise InputError(f"{path}: unsupported pixel mode {mode!r} (need 8-bit gray or RGB)")
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        raise InputError(f"{path}: cannot read image ({exc.strerror})") from exc
    except UnidentifiedImageError as exc:
        raise InputError(f"{path}: not a readable image") from exc
    except OSError as exc:
        raise InputError(f"{path}: {exc}") from exc


def quantize(img) -> np.ndarray:
    """Round-half-up to uint8."""
    return np.floor(pixels(img) * 255.0 + 0.5).astype(np.uint8)


def save_image(img, path: PathLike) -> None:
    path = Path(path)
    fmt = _WRITE_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise OutputError(f"{path}: unsupported output extension (use .png or .pgm)")
    try:
        Image.fromarray(quantize(img), mode="L").save(path, format=fmt)
    except OSError as exc:
        raise OutputError(f"{path}: cannot write image ({exc})") from exc


def integral_image(arr: np.ndarray) -> np.ndarray:
    """Summed-area table with a leading row and column of zeros."""
    sat = np.zeros((arr.shape[0] + 1, arr.shape[1] + 1), dtype=np.float64)
    np.cumsum(arr, axis=0, out=sat[1:, 1:])
    np.cumsum(sat[1:, 1:], axis=1, out=sat[1:, 1:])
    return sat


def patch_means(img, spec: PatchSpec) -> PatchMeanGrid:
    arr = pixels(img)
    rows, cols = spec.grid_shape(arr.shape)
    sat = integral_image(arr)
    k, s = spec.size, spec.stride
    r0 = np.arange(rows) * s
    c0 = np.arange(cols) * s
    sums = (
        sat[np.ix_(r0 + k, c0 + k)]
        - sat[np.ix_(r0, c0 + k)]
        - sat[np.ix_(r0 + k, c0)]
        + sat[np.ix_(r0, c0)]
    )
    means = np.clip(sums / (k * k), 0.0, None)
    return PatchMeanGrid(rows, cols, means)


def extract_patches(img, spec: PatchSpec) -> np.ndarray:
    """All grid patches flattened row-major, shape ``(rows*cols, size*size)``."""
    arr = pixels(img)
    rows, cols = spec.grid_shape(arr.shape)
    k, s = spec.size, spec.stride
    windows = sliding_window_view(arr, (k, k))[: (rows - 1) * s + 1 : s, : (cols - 1) * s + 1 : s]
    return np.ascontiguousarray(windows.reshape(rows * cols, k * k))


def scatter_patch_values(values: np.ndarray, shape, spec: PatchSpec) -> np.ndarray:
    """Accumulate per-patch per-pixel values back onto an image grid.

    ``values`` has shape ``(rows*cols, size*size)``, laid out like the
    output of :func:`extract_patches`.
    """
    rows, cols = spec.grid_shape(shape)
    k, s = spec.size, spec.stride
    out = np.zeros(shape, dtype=np.float64)
    vals = values.reshape(rows, cols, k, k)
    for u in range(k):
        for v in range(k):
            out[u : u + (rows - 1) * s + 1 : s, v : v + (cols - 1) * s + 1 : s] += vals[:, :, u, v]
    return out
