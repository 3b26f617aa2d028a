"""Core raster types and image operations.

Images are single-channel float64 rasters indexed ``data[y, x]``;
intensities live in [0, 1] after load or normalization. Displacement
fields store per-pixel (dx, dy) in pixel units with the backward-warp
convention: ``out(p) = in(p + field(p))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


def _as_plane(a, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable single-channel raster."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_plane(self.data, "image"))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def assert_unit_range(self) -> "Image":
        lo = float(self.data.min())
        hi = float(self.data.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"intensities outside [0, 1]: min={lo} max={hi}")
        return self


@dataclass(frozen=True, eq=False)
class DisplacementField:
    """Dense per-pixel 2-vector field (backward-warp convention)."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dx", _as_plane(self.dx, "field dx"))
        object.__setattr__(self, "dy", _as_plane(self.dy, "field dy"))
        if self.dx.shape != self.dy.shape:
            raise ValueError("dx and dy shapes differ")

    @property
    def width(self) -> int:
        return self.dx.shape[1]

    @property
    def height(self) -> int:
        return self.dx.shape[0]

    @classmethod
    def zero(cls, width: int, height: int) -> "DisplacementField":
        return cls(np.zeros((height, width)), np.zeros((height, width)))


@dataclass(frozen=True, eq=False)
class EdgeMap:
    """Sobel gradient magnitude and orientation (radians, (-pi, pi])."""

    magnitude: np.ndarray
    angle: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "magnitude", _as_plane(self.magnitude, "magnitude"))
        object.__setattr__(self, "angle", _as_plane(self.angle, "angle"))
        if self.magnitude.shape != self.angle.shape:
            raise ValueError("magnitude and angle shapes differ")

    @property
    def width(self) -> int:
        return self.magnitude.shape[1]

    @property
    def height(self) -> int:
        return self.magnitude.shape[0]


def warp(img: Image, field: DisplacementField) -> Image:
    """Backward-warp an image: out(p) = bilinear sample of img at p + field(p).

    Out-of-bounds sample positions clamp to the border pixel. The zero
    field reproduces the input exactly; constant integer fields reduce to
    clamped integer shifts with no interpolation error.
    """
    if (field.height, field.width) != (img.height, img.width):
        raise ValueError("field dimensions do not match image")
    out = kernels.warp_bilinear(img.data, field.dx, field.dy)
    np.clip(out, 0.0, 1.0, out=out)
    return Image(out)


def sobel(img: Image) -> EdgeMap:
    """3x3 Sobel edge map with replicate-padded borders."""
    if img.height < 3 or img.width < 3:
        raise ValueError("image too small for Sobel (needs at least 3x3)")
    gx, gy = kernels.sobel_xy(img.data)
    return EdgeMap(np.hypot(gx, gy), np.arctan2(gy, gx))


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps with radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: Image, sigma: float) -> Image:
    """Separable Gaussian blur with replicate padding."""
    k = gaussian_kernel(sigma)
    return Image(kernels.gaussian_blur_sep(img.data, k))


def resample_scale(img: Image, scale: float) -> Image:
    """Bilinear resampling to round(scale*W) x round(scale*H)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    ow = int(math.floor(scale * img.width + 0.5))
    oh = int(math.floor(scale * img.height + 0.5))
    if ow < 1 or oh < 1:
        raise ValueError("resampled dimensions would be smaller than 1 pixel")
    return Image(kernels.resize_bilinear(img.data, oh, ow))


def resample_to(img: Image, height: int, width: int) -> Image:
    """Bilinear resampling to an explicit target size."""
    if height < 1 or width < 1:
        raise ValueError("target dimensions must be at least 1 pixel")
    return Image(kernels.resize_bilinear(img.data, height, width))


def center_crop(img: Image, height: int, width: int) -> Image:
    """Crop the centered height x width window."""
    if height > img.height or width > img.width:
        raise ValueError("crop larger than image")
    oy = (img.height - height) // 2
    ox = (img.width - width) // 2
    return Image(img.data[oy : oy + height, ox : ox + width].copy())
