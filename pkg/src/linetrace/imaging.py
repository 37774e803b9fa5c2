"""Raster containers, RGB to HSV conversion, colour thresholding and
binary morphology.

Images are plain numpy arrays:

* RGB / HSV images: ``uint8`` arrays of shape ``(height, width, 3)``
* gray images: ``uint8`` arrays of shape ``(height, width)``
* binary masks: ``bool`` arrays of shape ``(height, width)``

Hue is stored in half-degree units ``[0, 180)`` so that it fits in a byte.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Tuple

import numpy as np

Rgb = Tuple[int, int, int]


class ImageError(ValueError):
    """Raised for malformed raster inputs."""


def check_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ImageError(f"expected (height, width, 3) image, got shape {img.shape}")
    if img.dtype != np.uint8:
        raise ImageError(f"expected uint8 channels, got {img.dtype}")
    return img


def check_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
        raise ImageError(f"expected (height, width) mask, got shape {mask.shape}")
    if mask.dtype != bool:
        raise ImageError(f"expected bool mask, got {mask.dtype}")
    return mask


@dataclass(frozen=True)
class HsvPixel:
    h: int
    s: int
    v: int

    def __post_init__(self):
        if not (0 <= self.h < 180 and 0 <= self.s <= 255 and 0 <= self.v <= 255):
            raise ImageError(f"HSV components out of range: {self}")

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.h, self.s, self.v)


@dataclass(frozen=True)
class HsvRange:
    """Inclusive, non-wrapping HSV box."""

    lower: HsvPixel
    upper: HsvPixel

    def __post_init__(self):
        lo, hi = self.lower, self.upper
        if lo.h > hi.h or lo.s > hi.s or lo.v > hi.v:
            raise ImageError(f"lower bound exceeds upper bound: {lo} > {hi}")

    @classmethod
    def from_tuples(cls, lower, upper) -> "HsvRange":
        return cls(HsvPixel(*map(int, lower)), HsvPixel(*map(int, upper)))


# Yellow floor-marking band.
YELLOW = HsvRange.from_tuples((18, 94, 140), (48, 255, 255))


@dataclass(frozen=True)
class StructuringElement:
    """Square all-ones kernel of side ``2 * half_width + 1``."""

    half_width: int = 1

    def __post_init__(self):
        if self.half_width < 1:
            raise ImageError("structuring element half_width must be >= 1")

    @property
    def size(self) -> int:
        return 2 * self.half_width + 1


def _round_div(num, den):
    # round-half-up of num/den for integer operands, den > 0
    return (2 * num + den) // (2 * den)


def rgb_to_hsv(pixel: Rgb) -> HsvPixel:
    r, g, b = (int(c) for c in pixel)
    v = max(r, g, b)
    diff = v - min(r, g, b)
    if diff == 0:
        return HsvPixel(0, 0, v)
    s = _round_div(255 * diff, v)
    if v == r:
        num = 30 * (g - b)
    elif v == g:
        num = 30 * (b - r) + 60 * diff
    else:
        num = 30 * (r - g) + 120 * diff
    h = _round_div(num, diff) % 180
    return HsvPixel(h, s, v)


def convert_image(img: np.ndarray) -> np.ndarray:
    """Vectorised ``rgb_to_hsv`` over an RGB image; returns a uint8 HSV image.

    Computed in float32: every operand is an integer below 2**24 and every
    non-integral quotient sits at least 1/510 away from an integer, so the
    floors are exact.
    """
    img = check_rgb(img)
    r, g, b = (img[..., k].astype(np.float32) for k in range(3))
    v = np.maximum(np.maximum(r, g), b)
    diff = v - np.minimum(np.minimum(r, g), b)
    den = np.maximum(diff, 1)

    s = np.floor((510 * diff + v) / (2 * np.maximum(v, 1)))

    num = np.where(
        v == r,
        30 * (g - b),
        np.where(v == g, 30 * (b - r) + 60 * diff, 30 * (r - g) + 120 * diff),
    )
    # achromatic pixels have num == 0 and therefore h == 0; h lands in
    # [-30, 180] before wrapping
    h = np.floor((2 * num + den) / (2 * den))
    h = np.where(h < 0, h + 180, np.where(h >= 180, h - 180, h))

    out = np.empty(img.shape, dtype=np.uint8)
    out[..., 0] = h
    out[..., 1] = s
    out[..., 2] = v
    return out


def threshold_hsv(hsv: np.ndarray, rng: HsvRange) -> np.ndarray:
    """Mask of pixels lying inside ``rng`` on every channel (bounds inclusive)."""
    hsv = np.asarray(hsv)
    mask = np.ones(hsv.shape[:2], dtype=bool)
    for k, (lo, hi) in enumerate(zip(rng.lower.as_tuple(), rng.upper.as_tuple())):
        channel = hsv[..., k]
        mask &= (channel >= lo) & (channel <= hi)
    return mask


@functools.lru_cache(maxsize=8)
def rgb_lookup(rng: HsvRange) -> np.ndarray:
    """Membership of every 24-bit RGB colour in ``rng``, indexed by 0xRRGGBB."""
    lut = np.empty((256, 256, 256), dtype=bool)
    gb = np.indices((256, 256), dtype=np.uint8)
    plane = np.empty((256, 256, 3), dtype=np.uint8)
    plane[..., 1], plane[..., 2] = gb
    for r in range(256):
        plane[..., 0] = r
        lut[r] = threshold_hsv(convert_image(plane), rng)
    return lut.reshape(-1)


def threshold_rgb(img: np.ndarray, rng: HsvRange) -> np.ndarray:
    """Same mask as ``threshold_hsv(convert_image(img), rng)`` via a cached
    per-range lookup table; the table costs about a second to build."""
    img = check_rgb(img)
    code = img[..., 0].astype(np.int32) << 16
    code |= img[..., 1].astype(np.int32) << 8
    code |= img[..., 2]
    return rgb_lookup(rng)[code]


def _filter_1d(mask: np.ndarray, hw: int, axis: int, reduce_all: bool) -> np.ndarray:
    # out-of-bounds pixels read as 0 on both sides
    n = mask.shape[axis]
    pad = [(0, 0), (0, 0)]
    pad[axis] = (hw, hw)
    padded = np.pad(mask, pad, constant_values=False)
    if axis == 1:
        padded = padded.T
    out = padded[0:n].copy()
    for k in range(1, 2 * hw + 1):
        window = padded[k:k + n]
        if reduce_all:
            out &= window
        else:
            out |= window
    return out.T if axis == 1 else out


def erode(mask: np.ndarray, se: StructuringElement = StructuringElement()) -> np.ndarray:
    mask = check_mask(mask)
    hw = se.half_width
    return _filter_1d(_filter_1d(mask, hw, 1, True), hw, 0, True)


def dilate(mask: np.ndarray, se: StructuringElement = StructuringElement()) -> np.ndarray:
    mask = check_mask(mask)
    hw = se.half_width
    return _filter_1d(_filter_1d(mask, hw, 1, False), hw, 0, False)


def denoise(mask: np.ndarray, se: StructuringElement = StructuringElement()) -> np.ndarray:
    """Morphological opening: strips specks smaller than the kernel."""
    return dilate(erode(mask, se), se)
