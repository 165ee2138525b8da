"""Training-time augmentation: random op sequences, random resized crops,
and channel normalization.

The op pool holds 16 intensity and geometry transformations controlled
by a single integer magnitude in [0, 30].  ``level = magnitude / 30``
scales each op's native parameter; only the geometric ops (rotate,
shear, translate) draw a random sign.  All fractional intensities are
committed with round-half-up, out-of-frame samples blend toward gray
(128), and magnitude 0 is neutral for every magnitude-parameterized op.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .errors import ImageError, SpaceError
from .image import affine_sample, check_rgb_u8, crop, resize_bilinear, round_half_up

__all__ = [
    "OP_POOL",
    "SIGNED_OPS",
    "MAX_MAGNITUDE",
    "FILL_VALUE",
    "op_parameter",
    "apply_op",
    "rand_augment",
    "RandAugment",
    "CropSpec",
    "CropSample",
    "sample_crop_spec",
    "random_resized_crop",
    "RandomResizedCrop",
    "ChannelStats",
    "compute_channel_stats",
    "normalize",
    "ChannelNormalizer",
]

OP_POOL: Tuple[str, ...] = (
    "identity",
    "auto-contrast",
    "equalize",
    "invert",
    "rotate",
    "solarize",
    "solarize-add",
    "color",
    "posterize",
    "contrast",
    "brightness",
    "sharpness",
    "shear-x",
    "shear-y",
    "translate-x",
    "translate-y",
)

#: Ops whose parameter gets a random sign; all others use it as-is.
SIGNED_OPS = frozenset({"rotate", "shear-x", "shear-y", "translate-x", "translate-y"})

MAX_MAGNITUDE = 30
FILL_VALUE = 128

_ENHANCE_OPS = frozenset({"color", "contrast", "brightness", "sharpness"})
_PARAMETERLESS_OPS = frozenset({"identity", "auto-contrast", "equalize", "invert"})


def _check_magnitude(magnitude: int) -> int:
    if not isinstance(magnitude, (int, np.integer)) or isinstance(magnitude, bool):
        raise SpaceError(f"magnitude must be an int, got {magnitude!r}")
    if not (0 <= magnitude <= MAX_MAGNITUDE):
        raise SpaceError(f"magnitude must lie in [0, {MAX_MAGNITUDE}], got {magnitude}")
    return int(magnitude)


def op_parameter(op: str, magnitude: int):
    """Native parameter for ``op`` at ``magnitude`` (None if unparameterized).

    rotate: degrees in [0, 30]; shear: factor in [0, 0.3]; translate:
    fraction of the moved dimension in [0, 0.45]; color/contrast/
    brightness/sharpness: blend factor ``1 + 0.9 * level``; posterize:
    bits kept, 8 down to 4; solarize: inversion threshold, 256 down to
    0; solarize-add: shift in [0, 110].
    """
    if op not in OP_POOL:
        raise SpaceError(f"unknown op {op!r}")
    magnitude = _check_magnitude(magnitude)
    level = magnitude / MAX_MAGNITUDE
    if op in _PARAMETERLESS_OPS:
        return None
    if op == "rotate":
        return 30.0 * level
    if op in ("shear-x", "shear-y"):
        return 0.3 * level
    if op in ("translate-x", "translate-y"):
        return 0.45 * level
    if op in _ENHANCE_OPS:
        return 1.0 + 0.9 * level
    if op == "posterize":
        return 8 - int(round_half_up(4.0 * level))
    if op == "solarize":
        return 256 - int(round_half_up(256.0 * level))
    if op == "solarize-add":
        return int(round_half_up(110.0 * level))
    raise AssertionError(op)


# -- intensity ops ---------------------------------------------------------


def _commit(values: np.ndarray) -> np.ndarray:
    return round_half_up(np.clip(values, 0.0, 255.0)).astype(np.uint8)


def _autocontrast(image: np.ndarray) -> np.ndarray:
    out = image.copy()
    for ch in range(3):
        plane = image[:, :, ch]
        lo = int(plane.min())
        hi = int(plane.max())
        if hi <= lo:
            continue
        scale = 255.0 / (hi - lo)
        lut = _commit((np.arange(256) - lo) * scale)
        out[:, :, ch] = lut[plane]
    return out


def _equalize(image: np.ndarray) -> np.ndarray:
    out = image.copy()
    for ch in range(3):
        plane = image[:, :, ch]
        histo = np.bincount(plane.ravel(), minlength=256)
        occupied = histo[histo > 0]
        if len(occupied) <= 1:
            continue
        step = (int(histo.sum()) - int(occupied[-1])) // 255
        if step == 0:
            continue
        cumulative = np.concatenate(([0], np.cumsum(histo)[:-1]))
        lut = np.clip((step // 2 + cumulative) // step, 0, 255).astype(np.uint8)
        out[:, :, ch] = lut[plane]
    return out


def _invert(image: np.ndarray) -> np.ndarray:
    return (255 - image.astype(np.int16)).astype(np.uint8)


def _solarize(image: np.ndarray, threshold: int) -> np.ndarray:
    return np.where(image >= threshold, 255 - image.astype(np.int16), image).astype(np.uint8)


def _solarize_add(image: np.ndarray, amount: int, threshold: int = 128) -> np.ndarray:
    shifted = np.clip(image.astype(np.int16) + amount, 0, 255)
    return np.where(image < threshold, shifted, image).astype(np.uint8)


def _posterize(image: np.ndarray, bits: int) -> np.ndarray:
    mask = np.uint8(0xFF << (8 - bits) & 0xFF)
    return image & mask


def _luma(image: np.ndarray) -> np.ndarray:
    img = image.astype(float)
    return 0.299 * img[:, :, 0] + 0.587 * img[:, :, 1] + 0.114 * img[:, :, 2]


def _blend(image: np.ndarray, degenerate: np.ndarray, factor: float) -> np.ndarray:
    img = image.astype(float)
    return _commit(degenerate + factor * (img - degenerate))


def _color(image: np.ndarray, factor: float) -> np.ndarray:
    return _blend(image, _luma(image)[:, :, None], factor)


def _contrast(image: np.ndarray, factor: float) -> np.ndarray:
    gray = float(round_half_up(_luma(image).mean()))
    return _blend(image, np.full_like(image, gray, dtype=float), factor)


def _brightness(image: np.ndarray, factor: float) -> np.ndarray:
    return _blend(image, np.zeros_like(image, dtype=float), factor)


def _sharpness(image: np.ndarray, factor: float) -> np.ndarray:
    img = image.astype(float)
    degenerate = img.copy()
    if img.shape[0] >= 3 and img.shape[1] >= 3:
        # 3x3 smoothing kernel [[1,1,1],[1,5,1],[1,1,1]] / 13, interior only
        acc = 5.0 * img[1:-1, 1:-1]
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                acc = acc + img[1 + dy : img.shape[0] - 1 + dy, 1 + dx : img.shape[1] - 1 + dx]
        degenerate[1:-1, 1:-1] = acc / 13.0
    return _blend(image, degenerate, factor)


# -- geometry ops ----------------------------------------------------------


def _rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    theta = math.radians(degrees)
    cos, sin = math.cos(theta), math.sin(theta)
    h, w = image.shape[:2]
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    coeffs = (
        cos,
        sin,
        cx - cos * cx - sin * cy,
        -sin,
        cos,
        cy + sin * cx - cos * cy,
    )
    return affine_sample(image, coeffs, fill=FILL_VALUE)


def _shear_x(image: np.ndarray, factor: float) -> np.ndarray:
    return affine_sample(image, (1.0, factor, 0.0, 0.0, 1.0, 0.0), fill=FILL_VALUE)


def _shear_y(image: np.ndarray, factor: float) -> np.ndarray:
    return affine_sample(image, (1.0, 0.0, 0.0, factor, 1.0, 0.0), fill=FILL_VALUE)


def _translate_x(image: np.ndarray, offset: float) -> np.ndarray:
    return affine_sample(image, (1.0, 0.0, offset, 0.0, 1.0, 0.0), fill=FILL_VALUE)


def _translate_y(image: np.ndarray, offset: float) -> np.ndarray:
    return affine_sample(image, (1.0, 0.0, 0.0, 0.0, 1.0, offset), fill=FILL_VALUE)


def apply_op(image: np.ndarray, op: str, magnitude: int, sign: int = 1) -> np.ndarray:
    """Apply one op at the given magnitude; ``sign`` only affects signed ops."""
    check_rgb_u8(image)
    if sign not in (1, -1):
        raise SpaceError(f"sign must be +1 or -1, got {sign!r}")
    param = op_parameter(op, magnitude)

    if op == "identity":
        return image.copy()
    if op == "auto-contrast":
        return _autocontrast(image)
    if op == "equalize":
        return _equalize(image)
    if op == "invert":
        return _invert(image)
    if op == "rotate":
        return _rotate(image, sign * param)
    if op == "solarize":
        return _solarize(image, param)
    if op == "solarize-add":
        return _solarize_add(image, param)
    if op == "color":
        return _color(image, param)
    if op == "posterize":
        return _posterize(image, param)
    if op == "contrast":
        return _contrast(image, param)
    if op == "brightness":
        return _brightness(image, param)
    if op == "sharpness":
        return _sharpness(image, param)
    if op == "shear-x":
        return _shear_x(image, sign * param)
    if op == "shear-y":
        return _shear_y(image, sign * param)
    if op == "translate-x":
        return _translate_x(image, sign * param * image.shape[1])
    if op == "translate-y":
        return _translate_y(image, sign * param * image.shape[0])
    raise AssertionError(op)


def rand_augment(
    image: np.ndarray,
    num_ops: int,
    magnitude: int,
    rng: np.random.Generator,
    op_pool: Sequence[str] = OP_POOL,
) -> np.ndarray:
    """Apply ``num_ops`` ops drawn uniformly (with replacement) from the pool.

    Generator consumption order: one batched draw of ``num_ops`` op
    indices, then one sign draw per signed op as it is applied.
    """
    check_rgb_u8(image)
    op_pool = tuple(op_pool)
    if len(op_pool) == 0 or len(set(op_pool)) != len(op_pool):
        raise SpaceError(f"op pool must be non-empty and distinct, got {op_pool!r}")
    unknown = [op for op in op_pool if op not in OP_POOL]
    if unknown:
        raise SpaceError(f"unknown ops in pool: {unknown}")
    if not isinstance(num_ops, (int, np.integer)) or isinstance(num_ops, bool):
        raise SpaceError(f"num_ops must be an int, got {num_ops!r}")
    if not (1 <= num_ops <= len(op_pool)):
        raise SpaceError(f"num_ops must lie in [1, {len(op_pool)}], got {num_ops}")
    _check_magnitude(magnitude)

    indices = rng.integers(0, len(op_pool), size=int(num_ops))
    out = image
    for index in indices:
        op = op_pool[int(index)]
        sign = 1
        if op in SIGNED_OPS:
            sign = 1 if rng.random() < 0.5 else -1
        out = apply_op(out, op, magnitude, sign=sign)
    return out


class RandAugment(BaseEstimator):
    """Stateless transformer applying random op sequences to uint8 images.

    ``transform`` accepts a single (H, W, 3) uint8 array or a list of
    them.  Pass an explicit generator for reproducible streams; with
    ``random_state`` only, an internal generator advances across calls.
    """

    def __init__(self, num_ops=2, magnitude=10, op_pool=OP_POOL, random_state=None):
        self.num_ops = num_ops
        self.magnitude = magnitude
        self.op_pool = op_pool
        self.random_state = random_state

    def fit(self, X=None, y=None):
        return self

    def transform(self, X, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else self._generator()
        if isinstance(X, np.ndarray):
            return rand_augment(X, self.num_ops, self.magnitude, rng, self.op_pool)
        return [rand_augment(img, self.num_ops, self.magnitude, rng, self.op_pool) for img in X]

    def _generator(self) -> np.random.Generator:
        if not hasattr(self, "_rng"):
            self._rng = np.random.default_rng(self.random_state)
        return self._rng


# -- random resized crop ----------------------------------------------------


@dataclass(frozen=True)
class CropSpec:
    top: int
    left: int
    height: int
    width: int


@dataclass(frozen=True)
class CropSample:
    """A sampled crop plus the draws that produced it."""

    spec: CropSpec
    area_fraction: float
    aspect_ratio: float
    attempts: int
    fallback: bool


def sample_crop_spec(
    rng: np.random.Generator,
    height: int,
    width: int,
    area_range: Tuple[float, float] = (0.10, 1.0),
    ratio_range: Tuple[float, float] = (3 / 4, 4 / 3),
    max_attempts: int = 10,
) -> CropSample:
    """Sample a crop rectangle: area uniform, aspect log-uniform.

    Each attempt consumes an area draw and a log-ratio draw (plus two
    position draws on success).  After ``max_attempts`` rejections the
    largest centered crop with the aspect clamped into range is used;
    its recorded area/ratio are then the realized ones.
    """
    if height < 1 or width < 1:
        raise ImageError(f"image size must be positive, got {height}x{width}")
    a_lo, a_hi = area_range
    if not (0 < a_lo <= a_hi <= 1):
        raise SpaceError(f"area_range must satisfy 0 < lo <= hi <= 1, got {area_range}")
    r_lo, r_hi = ratio_range
    if not (0 < r_lo <= r_hi):
        raise SpaceError(f"ratio_range must satisfy 0 < lo <= hi, got {ratio_range}")

    full_area = float(height * width)
    for attempt in range(1, max_attempts + 1):
        area_fraction = rng.uniform(a_lo, a_hi)
        aspect_ratio = math.exp(rng.uniform(math.log(r_lo), math.log(r_hi)))
        target = area_fraction * full_area
        crop_w = int(round_half_up(math.sqrt(target * aspect_ratio)))
        crop_h = int(round_half_up(math.sqrt(target / aspect_ratio)))
        if 0 < crop_w <= width and 0 < crop_h <= height:
            top = int(rng.integers(0, height - crop_h + 1))
            left = int(rng.integers(0, width - crop_w + 1))
            return CropSample(
                CropSpec(top, left, crop_h, crop_w), area_fraction, aspect_ratio, attempt, False
            )

    in_ratio = width / height
    if in_ratio < r_lo:
        crop_w = width
        crop_h = int(round_half_up(width / r_lo))
    elif in_ratio > r_hi:
        crop_h = height
        crop_w = int(round_half_up(height * r_hi))
    else:
        crop_w, crop_h = width, height
    top = (height - crop_h) // 2
    left = (width - crop_w) // 2
    return CropSample(
        CropSpec(top, left, crop_h, crop_w),
        crop_h * crop_w / full_area,
        crop_w / crop_h,
        max_attempts,
        True,
    )


def random_resized_crop(
    image: np.ndarray,
    rng: np.random.Generator,
    out_size: Tuple[int, int] = (224, 224),
    area_range: Tuple[float, float] = (0.10, 1.0),
    ratio_range: Tuple[float, float] = (3 / 4, 4 / 3),
    max_attempts: int = 10,
) -> np.ndarray:
    check_rgb_u8(image)
    sample = sample_crop_spec(
        rng, image.shape[0], image.shape[1], area_range, ratio_range, max_attempts
    )
    spec = sample.spec
    patch = crop(image, spec.top, spec.left, spec.height, spec.width)
    return resize_bilinear(patch, out_size[0], out_size[1])


class RandomResizedCrop(BaseEstimator):
    """Random area/aspect crop resized to a fixed output, as a transformer."""

    def __init__(
        self,
        out_size=(224, 224),
        area_range=(0.10, 1.0),
        ratio_range=(3 / 4, 4 / 3),
        max_attempts=10,
        random_state=None,
    ):
        self.out_size = out_size
        self.area_range = area_range
        self.ratio_range = ratio_range
        self.max_attempts = max_attempts
        self.random_state = random_state

    def fit(self, X=None, y=None):
        return self

    def transform(self, X, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else self._generator()
        kwargs = dict(
            out_size=tuple(self.out_size),
            area_range=tuple(self.area_range),
            ratio_range=tuple(self.ratio_range),
            max_attempts=self.max_attempts,
        )
        if isinstance(X, np.ndarray):
            return random_resized_crop(X, rng, **kwargs)
        return [random_resized_crop(img, rng, **kwargs) for img in X]

    def _generator(self) -> np.random.Generator:
        if not hasattr(self, "_rng"):
            self._rng = np.random.default_rng(self.random_state)
        return self._rng


# -- channel normalization ---------------------------------------------------


@dataclass(frozen=True)
class ChannelStats:
    """Per-channel mean and standard deviation of unit-scaled intensities."""

    mean: np.ndarray
    std: np.ndarray
    n_pixels: int

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        std = np.asarray(self.std, dtype=float)
        if mean.shape != (3,) or std.shape != (3,):
            raise ImageError(f"stats must have shape (3,), got {mean.shape} and {std.shape}")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(std)) and np.all(std > 0)):
            raise ImageError("stats must be finite with std > 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)


def compute_channel_stats(images: Iterable[np.ndarray], min_std: float = 1e-6) -> ChannelStats:
    """Population mean/std per channel over all pixels of all images.

    Streams one image at a time (images may differ in size) using a
    numerically stable pairwise merge of (count, mean, M2).
    """
    count = 0
    mean = np.zeros(3)
    m2 = np.zeros(3)
    for image in images:
        check_rgb_u8(image)
        pixels = image.reshape(-1, 3).astype(float) / 255.0
        n_b = pixels.shape[0]
        mean_b = pixels.mean(axis=0)
        m2_b = ((pixels - mean_b) ** 2).sum(axis=0)
        if count == 0:
            count, mean, m2 = n_b, mean_b, m2_b
        else:
            delta = mean_b - mean
            total = count + n_b
            mean = mean + delta * (n_b / total)
            m2 = m2 + m2_b + delta**2 * (count * n_b / total)
            count = total
    if count == 0:
        raise ImageError("cannot compute channel stats from zero images")
    std = np.maximum(np.sqrt(m2 / count), min_std)
    return ChannelStats(mean, std, count)


def normalize(image: np.ndarray, stats: ChannelStats) -> np.ndarray:
    """Map uint8 RGB to float64: ``(x / 255 - mean) / std`` per channel."""
    check_rgb_u8(image)
    return (image.astype(float) / 255.0 - stats.mean) / stats.std


class ChannelNormalizer(BaseEstimator, TransformerMixin):
    """Fit per-channel intensity statistics, then normalize images.

    ``fit`` accepts an iterable of uint8 RGB images of any sizes;
    ``transform`` maps a single image or a list to float64 arrays.
    """

    def __init__(self, min_std: float = 1e-6):
        self.min_std = min_std

    def fit(self, X, y=None):
        stats = compute_channel_stats(X, min_std=self.min_std)
        self.mean_ = stats.mean
        self.std_ = stats.std
        self.n_pixels_ = stats.n_pixels
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        stats = ChannelStats(self.mean_, self.std_, self.n_pixels_)
        if isinstance(X, np.ndarray) and X.ndim == 3:
            return normalize(X, stats)
        return [normalize(img, stats) for img in X]
