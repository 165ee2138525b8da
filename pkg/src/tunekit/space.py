"""Search-space definition and configuration sampling.

A search space is a fixed set of five named hyperparameters: two
log-uniform continuous ranges (learning rate, weight decay) and three
categorical choices (augmentation op count, augmentation magnitude,
batch size).  Sampling consumes the generator in field order, so a
seeded generator reproduces the same configuration stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from .errors import SpaceError

__all__ = [
    "LogUniform",
    "Choice",
    "SearchSpace",
    "TrialConfig",
    "default_search_space",
    "sample_config",
    "validate_config",
]


def _as_rng(rng: Union[np.random.Generator, int, None]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


@dataclass(frozen=True)
class LogUniform:
    """Continuous range sampled uniformly in log space."""

    low: float
    high: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise SpaceError(f"log-uniform bounds must be finite, got [{self.low}, {self.high}]")
        if not (0.0 < self.low < self.high):
            raise SpaceError(f"log-uniform requires 0 < low < high, got [{self.low}, {self.high}]")

    def contains(self, value: Any) -> bool:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return False
        return self.low <= float(value) <= self.high

    def sample(self, rng: np.random.Generator) -> float:
        u = rng.random()
        return math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))


@dataclass(frozen=True)
class Choice:
    """Finite set of values sampled uniformly."""

    values: tuple

    def __post_init__(self) -> None:
        values = tuple(self.values)
        if len(values) == 0:
            raise SpaceError("choice requires at least one value")
        if len(set(values)) != len(values):
            raise SpaceError(f"choice values must be distinct, got {values!r}")
        object.__setattr__(self, "values", values)

    def contains(self, value: Any) -> bool:
        return any(value == v and not (isinstance(value, bool) ^ isinstance(v, bool)) for v in self.values)

    def sample(self, rng: np.random.Generator):
        return self.values[int(rng.integers(len(self.values)))]


ParamSpec = Union[LogUniform, Choice]


@dataclass(frozen=True)
class TrialConfig:
    """One point in the search space."""

    learning_rate: float
    weight_decay: float
    randaugment_n: int
    randaugment_m: int
    batch_size: int

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "weight_decay": self.weight_decay,
            "randaugment_n": self.randaugment_n,
            "randaugment_m": self.randaugment_m,
            "batch_size": self.batch_size,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrialConfig":
        missing = [name for name in _FIELD_ORDER if name not in data]
        if missing:
            raise SpaceError(f"config missing fields: {missing}")
        extra = [name for name in data if name not in _FIELD_ORDER]
        if extra:
            raise SpaceError(f"config has unknown fields: {extra}")
        return cls(
            learning_rate=float(data["learning_rate"]),
            weight_decay=float(data["weight_decay"]),
            randaugment_n=int(data["randaugment_n"]),
            randaugment_m=int(data["randaugment_m"]),
            batch_size=int(data["batch_size"]),
        )


_FIELD_ORDER = (
    "learning_rate",
    "weight_decay",
    "randaugment_n",
    "randaugment_m",
    "batch_size",
)


@dataclass(frozen=True)
class SearchSpace:
    """Named parameter specs; field order fixes generator consumption order."""

    learning_rate: ParamSpec
    weight_decay: ParamSpec
    randaugment_n: ParamSpec
    randaugment_m: ParamSpec
    batch_size: ParamSpec

    def params(self) -> dict:
        return {name: getattr(self, name) for name in _FIELD_ORDER}

    def to_dict(self) -> dict:
        out = {}
        for name, spec in self.params().items():
            if isinstance(spec, LogUniform):
                out[name] = {"loguniform": [spec.low, spec.high]}
            else:
                out[name] = {"choice": list(spec.values)}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SearchSpace":
        specs = {}
        for name in _FIELD_ORDER:
            if name not in data:
                raise SpaceError(f"search space missing parameter {name!r}")
            specs[name] = _spec_from_dict(name, data[name])
        extra = [name for name in data if name not in _FIELD_ORDER]
        if extra:
            raise SpaceError(f"search space has unknown parameters: {extra}")
        return cls(**specs)


def _spec_from_dict(name: str, entry: Any) -> ParamSpec:
    if not isinstance(entry, dict) or len(entry) != 1:
        raise SpaceError(f"parameter {name!r} must be {{'loguniform': [low, high]}} or {{'choice': [...]}}")
    kind, value = next(iter(entry.items()))
    if kind == "loguniform":
        if not (isinstance(value, (list, tuple)) and len(value) == 2):
            raise SpaceError(f"parameter {name!r}: loguniform needs [low, high]")
        return LogUniform(float(value[0]), float(value[1]))
    if kind == "choice":
        if not isinstance(value, (list, tuple)):
            raise SpaceError(f"parameter {name!r}: choice needs a list of values")
        return Choice(tuple(value))
    raise SpaceError(f"parameter {name!r}: unknown spec kind {kind!r}")


def default_search_space() -> SearchSpace:
    """The standard image-classification tuning space."""
    return SearchSpace(
        learning_rate=LogUniform(1e-4, 0.1),
        weight_decay=LogUniform(1e-5, 0.1),
        randaugment_n=Choice((1, 2, 3)),
        randaugment_m=Choice((2, 6, 10, 14)),
        batch_size=Choice((8, 16)),
    )


def sample_config(space: SearchSpace, rng: Union[np.random.Generator, int, None]) -> TrialConfig:
    """Draw one configuration, consuming the generator in field order."""
    rng = _as_rng(rng)
    values = {name: spec.sample(rng) for name, spec in space.params().items()}
    config = TrialConfig(
        learning_rate=float(values["learning_rate"]),
        weight_decay=float(values["weight_decay"]),
        randaugment_n=int(values["randaugment_n"]),
        randaugment_m=int(values["randaugment_m"]),
        batch_size=int(values["batch_size"]),
    )
    problems = validate_config(space, config)
    if problems:  # pragma: no cover - sampling never leaves the space
        raise SpaceError("; ".join(problems))
    return config


def validate_config(space: SearchSpace, config: TrialConfig) -> list:
    """Return a list of human-readable violations (empty when valid)."""
    problems = []
    for name, spec in space.params().items():
        value = getattr(config, name)
        if not spec.contains(value):
            problems.append(f"{name}={value!r} outside {spec}")
    return problems
