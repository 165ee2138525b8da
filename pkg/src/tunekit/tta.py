"""Multi-view test-time evaluation.

Each image is scored under 30 deterministic views: three short-side
scales (ascending), five 224x224 crop positions (center and the four
corners, flush with the borders), each unflipped then mirrored.
Per-view logits become probabilities via a stabilized softmax and are
averaged with equal weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ImageError, PredictionError
from .image import check_rgb_u8, crop, hflip, resize_bilinear, round_half_up

__all__ = [
    "SCALES",
    "POSITIONS",
    "CROP_SIZE",
    "ViewSpec",
    "plan_views",
    "resize_short_side",
    "crop_offsets",
    "materialize_view",
    "softmax",
    "aggregate_predictions",
    "TTAPredictor",
]

SCALES: Tuple[int, ...] = (256, 288, 352)
POSITIONS: Tuple[str, ...] = ("center", "top-left", "top-right", "bottom-left", "bottom-right")
CROP_SIZE = 224


@dataclass(frozen=True)
class ViewSpec:
    scale: int
    position: str
    flipped: bool


def plan_views(
    height: int,
    width: int,
    scales: Sequence[int] = SCALES,
    crop_size: int = CROP_SIZE,
) -> List[ViewSpec]:
    """The full deterministic view list for an image of the given size.

    Order: scales ascending, then positions in declared order, then
    unflipped before flipped.
    """
    if height < 1 or width < 1:
        raise ImageError(f"image size must be positive, got {height}x{width}")
    scales = tuple(scales)
    if len(scales) == 0 or list(scales) != sorted(set(scales)):
        raise ImageError(f"scales must be distinct and ascending, got {scales!r}")
    if any(s < crop_size for s in scales):
        raise ImageError(f"every scale must be >= crop_size {crop_size}, got {scales!r}")
    return [
        ViewSpec(scale, position, flipped)
        for scale in scales
        for position in POSITIONS
        for flipped in (False, True)
    ]


def resize_short_side(image: np.ndarray, target: int) -> np.ndarray:
    """Scale so the shorter side equals ``target``, keeping aspect ratio."""
    check_rgb_u8(image)
    if target < 1:
        raise ImageError(f"target must be positive, got {target}")
    h, w = image.shape[:2]
    if h <= w:
        out_h = target
        out_w = int(round_half_up(w * target / h))
    else:
        out_w = target
        out_h = int(round_half_up(h * target / w))
    return resize_bilinear(image, out_h, out_w)


def crop_offsets(height: int, width: int, position: str, crop_size: int = CROP_SIZE) -> Tuple[int, int]:
    """(top, left) of the crop window; corners sit flush with the borders."""
    if position not in POSITIONS:
        raise ImageError(f"unknown crop position {position!r}")
    if height < crop_size or width < crop_size:
        raise ImageError(f"image {height}x{width} smaller than crop {crop_size}")
    if position == "center":
        return (height - crop_size) // 2, (width - crop_size) // 2
    top = 0 if position.startswith("top") else height - crop_size
    left = 0 if position.endswith("left") else width - crop_size
    return top, left


def materialize_view(image: np.ndarray, spec: ViewSpec, crop_size: int = CROP_SIZE) -> np.ndarray:
    """Render one view: short-side resize, positioned crop, optional mirror."""
    scaled = resize_short_side(image, spec.scale)
    top, left = crop_offsets(scaled.shape[0], scaled.shape[1], spec.position, crop_size)
    view = crop(scaled, top, left, crop_size, crop_size)
    if spec.flipped:
        view = hflip(view)
    return view


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stabilized softmax along the last axis."""
    logits = np.asarray(logits, dtype=float)
    if logits.size == 0:
        raise PredictionError("softmax requires at least one logit")
    if not np.all(np.isfinite(logits)):
        raise PredictionError("logits must be finite")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def aggregate_predictions(per_view_logits: Sequence[np.ndarray]) -> np.ndarray:
    """Mean of per-view softmax distributions (equal weights)."""
    if len(per_view_logits) == 0:
        raise PredictionError("need at least one view to aggregate")
    rows = [np.asarray(row, dtype=float) for row in per_view_logits]
    shape = rows[0].shape
    if any(row.shape != shape for row in rows) or len(shape) != 1:
        raise PredictionError(f"per-view logits must share one 1-D shape, got {[r.shape for r in rows]}")
    return softmax(np.stack(rows)).mean(axis=0)


class TTAPredictor(BaseEstimator):
    """Score images through a fixed view battery and average the softmaxes.

    ``scorer`` maps one uint8 view of shape (crop_size, crop_size, 3)
    to a 1-D logit vector.  ``predict_proba`` accepts a single image
    (returns one distribution) or a list (returns an (n, C) array);
    ``predict`` takes the argmax, lowest index winning ties.
    """

    def __init__(
        self,
        scorer: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        scales: Sequence[int] = SCALES,
        crop_size: int = CROP_SIZE,
    ):
        self.scorer = scorer
        self.scales = scales
        self.crop_size = crop_size

    def fit(self, X=None, y=None):
        return self

    def predict_proba(self, X) -> np.ndarray:
        if not callable(self.scorer):
            raise PredictionError("TTAPredictor requires a callable scorer")
        if isinstance(X, np.ndarray) and X.ndim == 3:
            return self._proba_one(X)
        return np.stack([self._proba_one(img) for img in X])

    def predict(self, X) -> np.ndarray:
        probs = self.predict_proba(X)
        return np.argmax(probs, axis=-1)

    def _proba_one(self, image: np.ndarray) -> np.ndarray:
        views = plan_views(image.shape[0], image.shape[1], self.scales, self.crop_size)
        logits = [np.asarray(self.scorer(materialize_view(image, spec, self.crop_size))) for spec in views]
        return aggregate_predictions(logits)
