"""Grayscale images and integral-image box sums.

The integral image is the substrate for all box-filter work: any
axis-aligned rectangle sum costs four lookups regardless of size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

# Minimum side length accepted by the interest-point detector.
MIN_DETECT_SIZE = 32

# Luma weights for RGB -> intensity conversion.
LUMA_WEIGHTS = (0.299, 0.587, 0.114)


# Intensities are quantized to this grid on construction.  With 16
# fractional bits, cumulative sums of any practical image stay exactly
# representable in double precision, so box sums are bit-exact and flat
# regions produce exactly-zero filter responses.
INTENSITY_QUANTUM = 1.0 / 65536.0


@dataclass(frozen=True)
class GrayscaleImage:
    """A single-channel image with intensities in [0, 1], row-major.

    Intensities are snapped to multiples of 1/65536 (finer than any 8-bit
    source) so that all downstream box-filter arithmetic is exact.
    """

    width: int
    height: int
    data: np.ndarray  # shape (height, width), float64

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(self.height, self.width)
        if arr.shape != (self.height, self.width):
            raise InvalidInputError(
                f"data shape {arr.shape} does not match {self.height}x{self.width}"
            )
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError("image dimensions must be positive")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError("image contains non-finite intensities")
        arr = np.round(arr / INTENSITY_QUANTUM) * INTENSITY_QUANTUM
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_array(cls, arr) -> "GrayscaleImage":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise InvalidInputError("expected a 2-D intensity array")
        return cls(width=arr.shape[1], height=arr.shape[0], data=arr)


@dataclass(frozen=True)
class IntegralImage:
    """Cumulative sums: entry (x, y) = sum of intensities over [0..x] x [0..y].

    ``padded`` carries an extra zero row/column so a rectangle sum is always
    four in-bounds lookups.
    """

    width: int
    height: int
    sums: np.ndarray  # shape (height, width), inclusive cumulative sums
    padded: np.ndarray = field(repr=False, default=None)

    def entry(self, x: int, y: int) -> float:
        return float(self.sums[y, x])


def compute_integral_image(img: GrayscaleImage) -> IntegralImage:
    """Cumulative-sum table of ``img``; O(1) box sums afterwards."""
    if img.width == 0 or img.height == 0 or img.data.size == 0:
        raise InvalidInputError("cannot integrate an empty image")
    sums = np.cumsum(np.cumsum(img.data, axis=0), axis=1)
    padded = np.zeros((img.height + 1, img.width + 1), dtype=np.float64)
    padded[1:, 1:] = sums
    return IntegralImage(width=img.width, height=img.height, sums=sums, padded=padded)


def box_sum(ii: IntegralImage, x: int, y: int, w: int, h: int) -> float:
    """Sum of intensities over columns [x, x+w) and rows [y, y+h).

    The rectangle is clipped to the image; out-of-bounds area contributes
    zero, and empty rectangles yield 0.
    """
    x0 = min(max(x, 0), ii.width)
    y0 = min(max(y, 0), ii.height)
    x1 = min(max(x + w, 0), ii.width)
    y1 = min(max(y + h, 0), ii.height)
    if x1 <= x0 or y1 <= y0:
        return 0.0
    p = ii.padded
    return float(p[y1, x1] - p[y0, x1] - p[y1, x0] + p[y0, x0])


def box_sum_grid(ii: IntegralImage, ys, xs, h: int, w: int) -> np.ndarray:
    """Vectorized ``box_sum`` for broadcastable arrays of top-left corners."""
    ys = np.asarray(ys)
    xs = np.asarray(xs)
    y0 = np.clip(ys, 0, ii.height)
    x0 = np.clip(xs, 0, ii.width)
    y1 = np.clip(ys + h, 0, ii.height)
    x1 = np.clip(xs + w, 0, ii.width)
    p = ii.padded
    return p[y1, x1] - p[y0, x1] - p[y1, x0] + p[y0, x0]


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """RGB (H, W, 3) floats in [0, 1] -> luma-weighted intensity."""
    r, g, b = LUMA_WEIGHTS
    return rgb[..., 0] * r + rgb[..., 1] * g + rgb[..., 2] * b


def load_image(path: str | Path) -> GrayscaleImage:
    """Decode a PNG/JPEG file into a GrayscaleImage."""
    from PIL import Image

    with Image.open(path) as im:
        im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.float64) / 255.0
    return GrayscaleImage.from_array(to_grayscale(arr))
