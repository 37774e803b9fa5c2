"""Binary PPM (P6) / PBM (P4) I/O and simple overlay drawing."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Tuple, Union

import numpy as np

from ..detection import Centroid, LineSegment
from ..imaging import check_mask, check_rgb

PathLike = Union[str, Path]


class ImageFormatError(ValueError):
    pass


def write_ppm(path: PathLike, img: np.ndarray) -> None:
    img = check_rgb(img)
    h, w, _ = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img).tobytes())


def write_pbm(path: PathLike, mask: np.ndarray) -> None:
    """1 = black = foreground, rows padded to whole bytes."""
    mask = check_mask(mask)
    h, w = mask.shape
    with open(path, "wb") as fh:
        fh.write(b"P4\n%d %d\n" % (w, h))
        fh.write(np.packbits(mask, axis=1).tobytes())


def _header(data: bytes, count: int) -> Tuple[list, int]:
    """Read ``count`` whitespace-separated header tokens (with # comments)."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated header")
        tokens.append(data[start:pos])
    return tokens, pos + 1  # one whitespace byte ends the header


def read_ppm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = _header(data, 4)
    if tokens[0] != b"P6":
        raise ImageFormatError(f"{path}: not a binary PPM (P6) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ImageFormatError(f"{path}: only 8-bit PPM is supported")
    body = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return body.reshape(h, w, 3).copy()


def read_pbm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens, pos = _header(data, 3)
    if tokens[0] != b"P4":
        raise ImageFormatError(f"{path}: not a binary PBM (P4) file")
    w, h = (int(t) for t in tokens[1:])
    row_bytes = (w + 7) // 8
    body = np.frombuffer(data, dtype=np.uint8, count=row_bytes * h, offset=pos)
    return np.unpackbits(body.reshape(h, row_bytes), axis=1)[:, :w].astype(bool)


def bresenham(x0: int, y0: int, x1: int, y1: int):
    """Integer points of the line from (x0, y0) to (x1, y1), both ends included."""
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        yield x, y
        if x == x1 and y == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def _plot(img, x, y, color):
    h, w = img.shape[:2]
    if 0 <= x < w and 0 <= y < h:
        img[y, x] = color


def draw_segments(img: np.ndarray, segments: Iterable[LineSegment],
                  color=(255, 0, 0)) -> np.ndarray:
    out = check_rgb(img).copy()
    for s in segments:
        for x, y in bresenham(s.x1, s.y1, s.x2, s.y2):
            _plot(out, x, y, color)
    return out


def draw_centroid(img: np.ndarray, c: Centroid, color=(0, 0, 255), arm: int = 6) -> np.ndarray:
    out = check_rgb(img).copy()
    cx, cy = int(round(c.cx)), int(round(c.cy))
    for d in range(-arm, arm + 1):
        _plot(out, cx + d, cy, color)
        _plot(out, cx, cy + d, color)
    return out


def mask_to_rgb(mask: np.ndarray) -> np.ndarray:
    return np.repeat(check_mask(mask)[..., None], 3, axis=2).astype(np.uint8) * 255
