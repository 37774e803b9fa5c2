"""Edge detection, progressive probabilistic Hough lines and the per-frame
line detection pipeline.

Canny is computed in exact integer arithmetic: the Gaussian kernel is
quantised to ``KERNEL_BITS`` fixed-point taps per axis and gradients are
compared as squared magnitudes, so results never depend on float summation
order.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from .imaging import (
    YELLOW,
    HsvRange,
    ImageError,
    StructuringElement,
    check_mask,
    check_rgb,
    convert_image,
    denoise,
    threshold_hsv,
    threshold_rgb,
)

KERNEL_BITS = 8
# smoothed images carry this factor (one KERNEL_BITS per axis)
GRADIENT_SCALE = 1 << (2 * KERNEL_BITS)

# tan(22.5 deg) in Q15, as used for the 4-bin direction quantisation
_TG22 = int(round(0.4142135623730950488 * (1 << 15)))

Seed = Union[int, Sequence[int], None]


@dataclass(frozen=True)
class CannyParams:
    low_threshold: float = 50.0
    high_threshold: float = 150.0
    blur_sigma: float = 1.4

    def __post_init__(self):
        if not 0 < self.low_threshold <= self.high_threshold:
            raise ValueError("need 0 < low_threshold <= high_threshold")
        if self.blur_sigma < 0:
            raise ValueError("blur_sigma must be >= 0")


@dataclass(frozen=True)
class HoughParams:
    rho_resolution: float = 1.0
    theta_resolution: float = math.pi / 180
    vote_threshold: int = 50
    min_line_length: int = 40
    max_line_gap: int = 50

    def __post_init__(self):
        for name in ("rho_resolution", "theta_resolution", "vote_threshold",
                     "min_line_length", "max_line_gap"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class LineSegment:
    x1: int
    y1: int
    x2: int
    y2: int

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)

    @property
    def angle(self) -> float:
        """Direction in radians, folded to [0, pi)."""
        return math.atan2(self.y2 - self.y1, self.x2 - self.x1) % math.pi


@dataclass(frozen=True)
class Centroid:
    cx: float
    cy: float


@dataclass(frozen=True)
class DetectionConfig:
    hsv_range: HsvRange = YELLOW
    morphology: StructuringElement = StructuringElement(1)
    canny: CannyParams = CannyParams()
    hough: HoughParams = HoughParams()


@dataclass
class DetectionResult:
    segments: List[LineSegment]
    centroid: Optional[Centroid]
    timing: float
    mask: Optional[np.ndarray] = field(default=None, repr=False)
    edges: Optional[np.ndarray] = field(default=None, repr=False)


def to_gray(img: np.ndarray) -> np.ndarray:
    """ITU-R 601 luma, rounded half up."""
    rgb = check_rgb(img).astype(np.int32)
    luma = 299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2]
    return ((luma + 500) // 1000).astype(np.uint8)


def gaussian_taps(sigma: float) -> np.ndarray:
    """Integer Gaussian taps summing to ``2**KERNEL_BITS``."""
    total = 1 << KERNEL_BITS
    if sigma <= 0:
        return np.array([total], dtype=np.int64)
    radius = max(1, int(math.ceil(3 * sigma)))
    x = np.arange(-radius, radius + 1)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    taps = np.rint(w / w.sum() * total).astype(np.int64)
    taps[radius] += total - taps.sum()
    return taps


def threshold_sq(threshold: float) -> int:
    """Squared gradient threshold in the fixed-point magnitude scale."""
    return int(math.ceil((threshold * GRADIENT_SCALE) ** 2))


def gradients(gray: np.ndarray, sigma: float):
    """Fixed-point smoothed Sobel gradients ``(gx, gy)`` as int64 arrays.

    ``gx`` grows to the right, ``gy`` downwards; borders replicate. Every
    intermediate is an integer below 2**53, so the float64 correlations are
    exact.
    """
    img = np.asarray(gray).astype(np.float64)
    taps = gaussian_taps(sigma).astype(np.float64)
    smooth = ndimage.correlate1d(img, taps, axis=0, mode="nearest")
    smooth = ndimage.correlate1d(smooth, taps, axis=1, mode="nearest")
    gx = ndimage.correlate1d(smooth, [1.0, 2.0, 1.0], axis=0, mode="nearest")
    gx = ndimage.correlate1d(gx, [-1.0, 0.0, 1.0], axis=1, mode="nearest")
    gy = ndimage.correlate1d(smooth, [1.0, 2.0, 1.0], axis=1, mode="nearest")
    gy = ndimage.correlate1d(gy, [-1.0, 0.0, 1.0], axis=0, mode="nearest")
    return gx.astype(np.int64), gy.astype(np.int64)


def canny(gray: np.ndarray, params: CannyParams = CannyParams()) -> np.ndarray:
    """Canny edges: smoothing, Sobel, 4-direction non-maximum suppression
    and 8-connected double-threshold hysteresis.

    Along the gradient direction a pixel must be strictly larger than the
    neighbour that comes first in raster order and at least as large as the
    other one, so plateaus of two keep exactly one pixel. The outermost
    pixel ring is never an edge.
    """
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ImageError(f"canny expects a 2-D gray image, got shape {gray.shape}")
    h, w = gray.shape
    if h < 3 or w < 3:
        raise ImageError(f"canny needs at least 3x3 pixels of support, got {w}x{h}")

    gx, gy = gradients(gray, params.blur_sigma)
    mag = gx * gx + gy * gy
    low = threshold_sq(params.low_threshold)
    high = threshold_sq(params.high_threshold)

    ii, jj = np.nonzero(mag[1:-1, 1:-1] >= low)
    ii += 1
    jj += 1
    m = mag[ii, jj]
    cgx, cgy = gx[ii, jj], gy[ii, jj]
    ax = np.abs(cgx)
    ay = np.abs(cgy) << 15
    tg22x = ax * _TG22
    tg67x = tg22x + (ax << 16)
    horiz = ay < tg22x
    vert = ~horiz & (ay > tg67x)
    same_sign = (cgx ^ cgy) >= 0
    # step toward the "later" neighbour along the quantised gradient
    di = np.where(horiz, 0, 1)
    dj = np.where(horiz, 1, np.where(vert, 0, np.where(same_sign, 1, -1)))
    keep_c = (m > mag[ii - di, jj - dj]) & (m >= mag[ii + di, jj + dj])

    keep = np.zeros((h, w), dtype=bool)
    keep[ii[keep_c], jj[keep_c]] = True
    labels, n = ndimage.label(keep, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return keep
    strong = np.zeros(n + 1, dtype=bool)
    strong[labels[keep & (mag >= high)]] = True
    strong[0] = False
    return strong[labels]


def _ray(x0: int, y0: int, a: float, b: float, sign: int, w: int, h: int):
    """Pixels visited walking from (x0, y0) along (sign*a, sign*b) until the
    image border, using 16-bit fixed-point minor-axis stepping."""
    shift = 16
    if abs(a) > abs(b):
        dx = 1 if a > 0 else -1
        dy = int(round(b * (1 << shift) / abs(a)))
        dx, dy = sign * dx, sign * dy
        n = (w - 1 - x0) if dx > 0 else x0
        t = np.arange(n + 1, dtype=np.int64)
        xs = x0 + dx * t
        ys = (((y0 << shift) + (1 << (shift - 1))) + dy * t) >> shift
    else:
        dy = 1 if b > 0 else -1
        dx = int(round(a * (1 << shift) / abs(b)))
        dx, dy = sign * dx, sign * dy
        n = (h - 1 - y0) if dy > 0 else y0
        t = np.arange(n + 1, dtype=np.int64)
        ys = y0 + dy * t
        xs = (((x0 << shift) + (1 << (shift - 1))) + dx * t) >> shift
    inside = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    if not inside.all():
        stop = int(np.argmin(inside))
        xs, ys = xs[:stop], ys[:stop]
    return xs, ys


def _walk_end(on: np.ndarray, max_gap: int) -> int:
    """Index of the last set pixel reached before a gap wider than max_gap."""
    ones = np.flatnonzero(on)
    if len(ones) == 0 or ones[0] > max_gap:
        return 0
    wide = np.flatnonzero(np.diff(ones) - 1 > max_gap)
    return int(ones[wide[0]]) if len(wide) else int(ones[-1])


def hough_lines(edges: np.ndarray, params: HoughParams = HoughParams(),
                seed: Seed = 0) -> List[LineSegment]:
    """Progressive probabilistic Hough transform.

    Edge pixels vote in a seeded random order. As soon as a (rho, theta)
    cell reaches ``vote_threshold`` the line through the current pixel is
    walked in both directions, bridging background runs of up to
    ``max_line_gap`` pixels. Walked pixels leave the pool (their votes are
    withdrawn when the walk yields a segment of at least
    ``min_line_length``).
    """
    mask = check_mask(edges).copy()
    h, w = mask.shape
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        return []

    numangle = int(round(math.pi / params.theta_resolution))
    numrho = int(round(((w + h) * 2 + 1) / params.rho_resolution))
    offset = (numrho - 1) // 2
    thetas = np.arange(numangle) * params.theta_resolution
    cos_t = np.cos(thetas) / params.rho_resolution
    sin_t = np.sin(thetas) / params.rho_resolution
    angle_idx = np.arange(numangle)

    # rho bin of every edge pixel at every angle, row i for pixel i
    rho = (np.rint(np.multiply.outer(xs, cos_t) + np.multiply.outer(ys, sin_t)).astype(np.int64)
           + offset)
    index = np.full((h, w), -1, dtype=np.int64)
    index[ys, xs] = np.arange(len(xs))

    acc = np.zeros((numangle, numrho), dtype=np.int32)
    voted = np.zeros_like(mask)
    order = np.random.default_rng(seed).permutation(len(xs))
    segments: List[LineSegment] = []

    for i in order:
        x, y = int(xs[i]), int(ys[i])
        if not mask[y, x]:
            continue
        r = rho[i]
        acc[angle_idx, r] += 1
        voted[y, x] = True
        votes = acc[angle_idx, r]
        best = int(np.argmax(votes))
        if votes[best] < params.vote_threshold:
            continue

        a, b = -math.sin(thetas[best]), math.cos(thetas[best])
        ends = []
        paths = []
        for sign in (1, -1):
            rx, ry = _ray(x, y, a, b, sign, w, h)
            k = _walk_end(mask[ry, rx], params.max_line_gap)
            ends.append((int(rx[k]), int(ry[k])))
            paths.append((rx[:k + 1], ry[:k + 1]))

        (ex0, ey0), (ex1, ey1) = ends
        good = (abs(ex1 - ex0) >= params.min_line_length
                or abs(ey1 - ey0) >= params.min_line_length)

        px = np.concatenate([paths[0][0], paths[1][0]])
        py = np.concatenate([paths[0][1], paths[1][1]])
        if good:
            # consume a one-pixel corridor across the minor axis, otherwise
            # the rest of a slanted thin line returns as a near-duplicate
            if abs(a) >= abs(b):
                px = np.concatenate([px, px, px])
                py = np.concatenate([py, py - 1, py + 1])
            else:
                px = np.concatenate([px, px - 1, px + 1])
                py = np.concatenate([py, py, py])
            inside = (px >= 0) & (px < w) & (py >= 0) & (py < h)
            px, py = px[inside], py[inside]
        hit = mask[py, px]
        px, py = px[hit], py[hit]
        if good:
            was_voted = voted[py, px]
            ux, uy = px[was_voted], py[was_voted]
            # pixels may repeat (start pixel is on both rays)
            uniq = np.unique(uy * w + ux)
            ux, uy = uniq % w, uniq // w
            if len(ux):
                np.subtract.at(acc, (np.broadcast_to(angle_idx, (len(ux), numangle)), rho[index[uy, ux]]), 1)
            voted[uy, ux] = False
        mask[py, px] = False
        if good:
            segments.append(LineSegment(ex0, ey0, ex1, ey1))
    return segments


def centroid_of(segments: Sequence[LineSegment]) -> Optional[Centroid]:
    """Mean of all segment endpoints, or None for no segments."""
    if not segments:
        return None
    xs = [s.x1 for s in segments] + [s.x2 for s in segments]
    ys = [s.y1 for s in segments] + [s.y2 for s in segments]
    return Centroid(sum(xs) / len(xs), sum(ys) / len(ys))


def mask_edges(mask: np.ndarray, params: CannyParams = CannyParams()) -> np.ndarray:
    """Canny of a binary mask rendered as 0/255 gray.

    Only the bounding box of the foreground (plus a margin wider than the
    smoothing and Sobel support) is processed; everywhere else the gradient
    is zero, so the output equals ``canny`` on the whole frame.
    """
    mask = check_mask(mask)
    h, w = mask.shape
    rows = np.flatnonzero(mask.any(axis=1))
    if len(rows) == 0 or h < 3 or w < 3:
        return canny(mask.astype(np.uint8) * 255, params)
    cols = np.flatnonzero(mask.any(axis=0))
    margin = len(gaussian_taps(params.blur_sigma)) // 2 + 4
    r0, r1 = max(0, rows[0] - margin), min(h, rows[-1] + margin + 1)
    c0, c1 = max(0, cols[0] - margin), min(w, cols[-1] + margin + 1)
    edges = np.zeros((h, w), dtype=bool)
    edges[r0:r1, c0:c1] = canny(mask[r0:r1, c0:c1].astype(np.uint8) * 255, params)
    return edges


def detect_line(frame: np.ndarray, cfg: DetectionConfig = DetectionConfig(),
                seed: Seed = 0) -> DetectionResult:
    """HSV threshold -> opening -> Canny -> Hough -> endpoint centroid."""
    t0 = time.perf_counter()
    mask = denoise(threshold_rgb(frame, cfg.hsv_range), cfg.morphology)
    edges = mask_edges(mask, cfg.canny)
    segments = hough_lines(edges, cfg.hough, seed)
    centroid = centroid_of(segments)
    return DetectionResult(segments, centroid, time.perf_counter() - t0, mask, edges)
