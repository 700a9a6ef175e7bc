"""8-bit RGB image helpers: PNG I/O, bilinear sampling and resizing.

Images are numpy arrays of shape (height, width, 3), dtype uint8.  All 2D
coordinates in the toolkit live in a continuous frame where pixel
(col i, row j) covers [i, i+1) x [j, j+1) and its center sits at
(i + 0.5, j + 0.5).  The sampling helpers below take pixel-center
coordinates (i.e. continuous position minus 0.5); callers convert.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import InvalidArgumentError


def validate_image(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise InvalidArgumentError(f"expected (H, W, 3) uint8 image, got shape {arr.shape} dtype {arr.dtype}")
    return arr


def load_image(path) -> np.ndarray:
    with PILImage.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_image(img: np.ndarray, path) -> None:
    validate_image(img)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(img, mode="RGB").save(str(path), format="PNG")


def to_u8(img_float: np.ndarray) -> np.ndarray:
    """Round half up and clip to the uint8 range."""
    return np.clip(np.floor(img_float + 0.5), 0, 255).astype(np.uint8)


def sample_bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear samples at pixel-center coordinates, clamped at the border.

    x/y may be any matching shape; returns float64 samples of shape
    x.shape + (channels,).
    """
    h, w = img.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    img = img.astype(np.float64)
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with the half-pixel-center mapping, uint8 in and out."""
    validate_image(img)
    if out_h < 1 or out_w < 1:
        raise InvalidArgumentError("output size must be positive")
    h, w = img.shape[:2]
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return to_u8(sample_bilinear(img, gx, gy))
