"""Probability-averaging ensembles and ensemble-size accuracy curves.

Member models are interchangeable: each contributes one probability
vector per sample, the ensemble prediction is the argmax of the
per-class mean (lowest index wins exact ties).  Predictions are
exchanged as JSON-lines files and size curves as CSV.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np

from .errors import PredictionError

__all__ = [
    "ModelPredictions",
    "CurvePoint",
    "combine",
    "ensemble_accuracy",
    "ensemble_size_curve",
    "write_predictions_jsonl",
    "load_predictions_jsonl",
    "write_curve_csv",
    "load_curve_csv",
]


def _check_prob_vector(vec: np.ndarray, where: str) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    if vec.ndim != 1 or vec.size == 0:
        raise PredictionError(f"{where}: probabilities must be a non-empty 1-D vector")
    if not np.all(np.isfinite(vec)) or np.any(vec < 0):
        raise PredictionError(f"{where}: probabilities must be finite and non-negative")
    if abs(float(vec.sum()) - 1.0) > 1e-6:
        raise PredictionError(f"{where}: probabilities must sum to 1, got {vec.sum()}")
    return vec


@dataclass
class ModelPredictions:
    """One model's probability vector per sample id."""

    model_id: str
    probs: Dict[str, np.ndarray]

    def __post_init__(self) -> None:
        if not self.probs:
            raise PredictionError(f"model {self.model_id!r} has no predictions")
        n_classes = None
        checked = {}
        for sample_id, vec in self.probs.items():
            vec = _check_prob_vector(vec, f"model {self.model_id!r}, sample {sample_id!r}")
            if n_classes is None:
                n_classes = vec.size
            elif vec.size != n_classes:
                raise PredictionError(
                    f"model {self.model_id!r}: inconsistent class counts "
                    f"({vec.size} vs {n_classes} at sample {sample_id!r})"
                )
            checked[str(sample_id)] = vec
        self.probs = checked

    @property
    def n_classes(self) -> int:
        return next(iter(self.probs.values())).size

    @property
    def sample_ids(self) -> frozenset:
        return frozenset(self.probs)


def _check_members(predictions: Sequence[ModelPredictions]) -> None:
    if len(predictions) == 0:
        raise PredictionError("need at least one model")
    ids = predictions[0].sample_ids
    n_classes = predictions[0].n_classes
    for member in predictions[1:]:
        if member.sample_ids != ids:
            raise PredictionError(
                f"model {member.model_id!r} covers different samples than "
                f"{predictions[0].model_id!r}"
            )
        if member.n_classes != n_classes:
            raise PredictionError(
                f"model {member.model_id!r} predicts {member.n_classes} classes, "
                f"expected {n_classes}"
            )


def combine(predictions: Sequence[ModelPredictions], sample_id: str) -> Tuple[int, np.ndarray]:
    """Ensemble (class, mean probabilities) for one sample."""
    _check_members(predictions)
    rows = []
    for member in predictions:
        if sample_id not in member.probs:
            raise PredictionError(f"sample {sample_id!r} missing from model {member.model_id!r}")
        rows.append(member.probs[sample_id])
    mean = np.stack(rows).mean(axis=0)
    return int(np.argmax(mean)), mean


def _stacked(predictions: Sequence[ModelPredictions]) -> Tuple[List[str], np.ndarray]:
    sample_ids = sorted(predictions[0].sample_ids)
    matrix = np.stack(
        [np.stack([member.probs[sid] for sid in sample_ids]) for member in predictions]
    )
    return sample_ids, matrix


def ensemble_accuracy(
    predictions: Sequence[ModelPredictions], labels: Mapping[str, int]
) -> float:
    """Accuracy of the full ensemble over all covered samples."""
    _check_members(predictions)
    sample_ids, matrix = _stacked(predictions)
    y = _label_vector(sample_ids, labels)
    mean = matrix.mean(axis=0)
    return float((np.argmax(mean, axis=1) == y).mean())


def _label_vector(sample_ids: Sequence[str], labels: Mapping[str, int]) -> np.ndarray:
    missing = [sid for sid in sample_ids if sid not in labels]
    if missing:
        raise PredictionError(f"labels missing for samples: {missing[:5]}")
    return np.asarray([int(labels[sid]) for sid in sample_ids])


@dataclass(frozen=True)
class CurvePoint:
    size: int
    mean_accuracy: float
    std_accuracy: float


def ensemble_size_curve(
    predictions: Sequence[ModelPredictions],
    labels: Mapping[str, int],
    sizes: Sequence[int],
    repeats: int = 20,
    rng: Union[np.random.Generator, int, None] = None,
) -> List[CurvePoint]:
    """Accuracy vs ensemble size over random without-replacement subsets.

    For each size, ``repeats`` member subsets are drawn and scored; the
    point records their mean and population standard deviation.
    """
    _check_members(predictions)
    if repeats < 1:
        raise PredictionError(f"repeats must be >= 1, got {repeats}")
    n_models = len(predictions)
    sizes = [int(s) for s in sizes]
    if any(not (1 <= s <= n_models) for s in sizes):
        raise PredictionError(f"sizes must lie in [1, {n_models}], got {sizes}")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)

    sample_ids, matrix = _stacked(predictions)
    y = _label_vector(sample_ids, labels)
    points = []
    for size in sizes:
        accs = np.empty(repeats)
        for rep in range(repeats):
            chosen = rng.choice(n_models, size=size, replace=False)
            mean = matrix[chosen].mean(axis=0)
            accs[rep] = (np.argmax(mean, axis=1) == y).mean()
        points.append(CurvePoint(size, float(accs.mean()), float(accs.std())))
    return points


# -- file formats ------------------------------------------------------------


def write_predictions_jsonl(path: Union[str, Path], predictions: Sequence[ModelPredictions]) -> None:
    """One line per (sample, model): {"sample_id", "model_id", "probs"}."""
    with open(path, "w", encoding="utf-8") as fh:
        for member in predictions:
            for sample_id in sorted(member.probs):
                row = {
                    "sample_id": sample_id,
                    "model_id": member.model_id,
                    "probs": [float(p) for p in member.probs[sample_id]],
                }
                fh.write(json.dumps(row) + "\n")


def load_predictions_jsonl(path: Union[str, Path]) -> List[ModelPredictions]:
    """Group prediction rows by model, in order of first appearance."""
    by_model: Dict[str, Dict[str, np.ndarray]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise PredictionError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            try:
                sample_id = str(row["sample_id"])
                model_id = str(row["model_id"])
                probs = np.asarray(row["probs"], dtype=float)
            except (KeyError, TypeError, ValueError) as exc:
                raise PredictionError(f"{path}:{lineno}: malformed prediction row") from exc
            bucket = by_model.setdefault(model_id, {})
            if sample_id in bucket:
                raise PredictionError(
                    f"{path}:{lineno}: duplicate prediction for sample {sample_id!r}, "
                    f"model {model_id!r}"
                )
            bucket[sample_id] = probs
    return [ModelPredictions(model_id, probs) for model_id, probs in by_model.items()]


def write_curve_csv(path: Union[str, Path], points: Sequence[CurvePoint]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["size", "mean_acc", "std_acc"])
        for point in points:
            writer.writerow([point.size, f"{point.mean_accuracy:.6f}", f"{point.std_accuracy:.6f}"])


def load_curve_csv(path: Union[str, Path]) -> List[CurvePoint]:
    points = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["size", "mean_acc", "std_acc"]
        if reader.fieldnames != expected:
            raise PredictionError(f"{path}: expected header {expected}, got {reader.fieldnames}")
        for row in reader:
            points.append(CurvePoint(int(row["size"]), float(row["mean_acc"]), float(row["std_acc"])))
    return points
