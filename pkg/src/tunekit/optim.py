"""Cosine learning-rate annealing and SGD with momentum.

The update treats weight decay as coupled L2 regularization: the decay
term is added to the gradient before the momentum buffer is updated.
Parameters, gradients, and velocity are plain float arrays; the step
returns new arrays and never mutates its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import OptimError

__all__ = ["OptimizerConfig", "cosine_lr", "sgd_momentum_step"]


@dataclass(frozen=True)
class OptimizerConfig:
    initial_lr: float
    weight_decay: float
    total_steps: int
    min_lr: float = 0.0
    momentum: float = 0.9

    def __post_init__(self) -> None:
        if not (math.isfinite(self.initial_lr) and self.initial_lr > 0):
            raise OptimError(f"initial_lr must be positive and finite, got {self.initial_lr}")
        if not (math.isfinite(self.weight_decay) and self.weight_decay >= 0):
            raise OptimError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.total_steps < 1:
            raise OptimError(f"total_steps must be >= 1, got {self.total_steps}")
        if not (math.isfinite(self.min_lr) and 0 <= self.min_lr <= self.initial_lr):
            raise OptimError(f"min_lr must lie in [0, initial_lr], got {self.min_lr}")
        if not (0 <= self.momentum < 1):
            raise OptimError(f"momentum must lie in [0, 1), got {self.momentum}")


def cosine_lr(step: int, config: OptimizerConfig) -> float:
    """Annealed rate at ``step`` (0-based) over ``config.total_steps``.

    Step 0 returns ``initial_lr`` exactly; step ``total_steps`` returns
    ``min_lr`` exactly; the midpoint returns their average.
    """
    if not (0 <= step <= config.total_steps):
        raise OptimError(f"step must lie in [0, {config.total_steps}], got {step}")
    span = config.initial_lr - config.min_lr
    return config.min_lr + 0.5 * span * (1.0 + math.cos(math.pi * step / config.total_steps))


def sgd_momentum_step(
    params: np.ndarray,
    grads: np.ndarray,
    velocity: np.ndarray,
    lr: float,
    config: OptimizerConfig,
) -> Tuple[np.ndarray, np.ndarray]:
    """One update; returns ``(new_params, new_velocity)``.

    ``g = grads + weight_decay * params``;
    ``v = momentum * velocity + g``;
    ``p = params - lr * v``.
    """
    params = np.asarray(params, dtype=float)
    grads = np.asarray(grads, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    if not (params.shape == grads.shape == velocity.shape):
        raise OptimError(
            f"shape mismatch: params {params.shape}, grads {grads.shape}, velocity {velocity.shape}"
        )
    if not (math.isfinite(lr) and lr >= 0):
        raise OptimError(f"lr must be >= 0 and finite, got {lr}")
    for name, arr in (("params", params), ("grads", grads), ("velocity", velocity)):
        if not np.all(np.isfinite(arr)):
            raise OptimError(f"{name} contains non-finite values")

    g = grads + config.weight_decay * params
    new_velocity = config.momentum * velocity + g
    new_params = params - lr * new_velocity
    return new_params, new_velocity
