"""Low-level image primitives on uint8 RGB arrays.

All geometry here is pure numpy so results are reproducible to the
byte across platforms; PIL is used only to read and write files.
Fractional intensities are committed with round-half-up, and bilinear
resampling uses half-pixel-center coordinates without antialiasing.
"""

from __future__ import annotations

from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image

from .errors import ImageError

__all__ = [
    "round_half_up",
    "check_rgb_u8",
    "load_image",
    "save_image",
    "resize_bilinear",
    "crop",
    "hflip",
    "affine_sample",
]


def round_half_up(x):
    """Round with .5 always going up (2.5 -> 3), elementwise."""
    return np.floor(np.asarray(x, dtype=float) + 0.5)


def check_rgb_u8(image: np.ndarray, name: str = "image") -> np.ndarray:
    """Validate an (H, W, 3) uint8 array and return it unchanged."""
    if not isinstance(image, np.ndarray):
        raise ImageError(f"{name} must be a numpy array, got {type(image).__name__}")
    if image.dtype != np.uint8:
        raise ImageError(f"{name} must have dtype uint8, got {image.dtype}")
    if image.ndim != 3 or image.shape[2] != 3:
        raise ImageError(f"{name} must have shape (H, W, 3), got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ImageError(f"{name} must be non-empty, got shape {image.shape}")
    return image


def load_image(path: Union[str, Path]) -> np.ndarray:
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def save_image(image: np.ndarray, path: Union[str, Path]) -> None:
    check_rgb_u8(image)
    Image.fromarray(image, mode="RGB").save(path)


def resize_bilinear(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and no antialias filter."""
    check_rgb_u8(image)
    if out_h < 1 or out_w < 1:
        raise ImageError(f"output size must be positive, got {out_h}x{out_w}")
    h, w = image.shape[:2]
    if (out_h, out_w) == (h, w):
        return image.copy()

    src_y = (np.arange(out_h, dtype=float) + 0.5) * h / out_h - 0.5
    src_x = (np.arange(out_w, dtype=float) + 0.5) * w / out_w - 0.5
    y0 = np.floor(src_y)
    x0 = np.floor(src_x)
    fy = (src_y - y0)[:, None, None]
    fx = (src_x - x0)[None, :, None]
    y0 = y0.astype(int)
    x0 = x0.astype(int)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)

    # Accumulate the four corners in a fixed order so results are
    # bit-identical to the per-pixel definition.
    img = image.astype(float)
    out = ((1 - fy) * (1 - fx)) * img[y0c][:, x0c]
    out = out + ((1 - fy) * fx) * img[y0c][:, x1c]
    out = out + (fy * (1 - fx)) * img[y1c][:, x0c]
    out = out + (fy * fx) * img[y1c][:, x1c]
    return np.clip(round_half_up(out), 0, 255).astype(np.uint8)


def crop(image: np.ndarray, top: int, left: int, height: int, width: int) -> np.ndarray:
    check_rgb_u8(image)
    h, w = image.shape[:2]
    if height < 1 or width < 1:
        raise ImageError(f"crop size must be positive, got {height}x{width}")
    if top < 0 or left < 0 or top + height > h or left + width > w:
        raise ImageError(
            f"crop [{top}:{top + height}, {left}:{left + width}] outside image of size {h}x{w}"
        )
    return image[top : top + height, left : left + width].copy()


def hflip(image: np.ndarray) -> np.ndarray:
    check_rgb_u8(image)
    return image[:, ::-1].copy()


def affine_sample(
    image: np.ndarray,
    coeffs: Tuple[float, float, float, float, float, float],
    fill: int = 128,
) -> np.ndarray:
    """Inverse-map the image through ``src = A @ (x, y, 1)`` bilinearly.

    ``coeffs = (a, b, c, d, e, f)`` gives ``src_x = a*x + b*y + c`` and
    ``src_y = d*x + e*y + f`` for each output pixel ``(x, y)``.  Source
    samples falling outside the image blend toward ``fill``.
    """
    check_rgb_u8(image)
    if not (0 <= fill <= 255):
        raise ImageError(f"fill must be an intensity in [0, 255], got {fill}")
    a, b, c, d, e, f = (float(v) for v in coeffs)
    h, w = image.shape[:2]
    xs = np.arange(w, dtype=float)[None, :]
    ys = np.arange(h, dtype=float)[:, None]
    src_x = a * xs + b * ys + c
    src_y = d * xs + e * ys + f

    x0 = np.floor(src_x)
    y0 = np.floor(src_y)
    fx = src_x - x0
    fy = src_y - y0
    x0 = x0.astype(int)
    y0 = y0.astype(int)

    img = image.astype(float)
    out = np.zeros((h, w, 3), dtype=float)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            weight = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            values = img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
            values = np.where(inside[..., None], values, float(fill))
            out += weight[..., None] * values
    return np.clip(round_half_up(out), 0, 255).astype(np.uint8)
