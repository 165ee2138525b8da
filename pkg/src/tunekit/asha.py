"""Asynchronous successive-halving scheduler (stopping rule).

Trials report a metric at increasing resource levels (epochs).  At each
rung — ``grace_period * reduction_factor**k`` up to ``max_resource`` —
the scheduler inserts the report into the rung, ranks it against every
report seen at that rung so far, and keeps the trial only if it ranks
within the top ``ceil(n / reduction_factor)``.  Decisions are made per
arrival, never retracted, and do not depend on trials that have not yet
reached the rung.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .errors import SchedulerError

__all__ = [
    "Decision",
    "TrialStatus",
    "AshaConfig",
    "AshaScheduler",
    "DecisionRecord",
    "BestTrial",
    "rung_levels",
]


class Decision(str, Enum):
    """Verdict for one reported result."""

    CONTINUE = "continue"
    STOP = "stop"
    COMPLETE = "complete"


class TrialStatus(str, Enum):
    RUNNING = "running"
    STOPPED = "stopped"
    COMPLETED = "completed"


@dataclass(frozen=True)
class AshaConfig:
    grace_period: int
    max_resource: int
    num_trials: int
    reduction_factor: int = 4
    metric_mode: str = "max"

    def __post_init__(self) -> None:
        if self.grace_period < 1:
            raise SchedulerError(f"grace_period must be >= 1, got {self.grace_period}")
        if self.max_resource < self.grace_period:
            raise SchedulerError(
                f"max_resource ({self.max_resource}) must be >= grace_period ({self.grace_period})"
            )
        if self.reduction_factor < 2:
            raise SchedulerError(f"reduction_factor must be >= 2, got {self.reduction_factor}")
        if self.num_trials < 1:
            raise SchedulerError(f"num_trials must be >= 1, got {self.num_trials}")
        if self.metric_mode not in ("max", "min"):
            raise SchedulerError(f"metric_mode must be 'max' or 'min', got {self.metric_mode!r}")


def rung_levels(config: AshaConfig) -> Tuple[int, ...]:
    """All resource levels at which stop/continue is decided, ascending."""
    levels = []
    level = config.grace_period
    while level <= config.max_resource:
        levels.append(level)
        level *= config.reduction_factor
    return tuple(levels)


@dataclass(frozen=True)
class DecisionRecord:
    index: int
    trial_id: int
    resource: int
    decision: Decision


@dataclass(frozen=True)
class BestTrial:
    trial_id: int
    metric: float
    resource: int


class AshaScheduler:
    """Per-arrival successive halving over a fixed trial budget."""

    def __init__(self, config: AshaConfig) -> None:
        self.config = config
        self._rung_levels = rung_levels(config)
        self._rungs: Dict[int, List[Tuple[int, float]]] = {level: [] for level in self._rung_levels}
        self._status: Dict[int, TrialStatus] = {}
        self._last_resource: Dict[int, int] = {}
        self._decisions: List[DecisionRecord] = []

    # -- read-only views ------------------------------------------------

    @property
    def rungs(self) -> Dict[int, List[Tuple[int, float]]]:
        """Rung records in insertion order; treat as read-only."""
        return self._rungs

    @property
    def trial_status(self) -> Dict[int, TrialStatus]:
        return dict(self._status)

    @property
    def decision_log(self) -> Tuple[DecisionRecord, ...]:
        return tuple(self._decisions)

    def state_snapshot(self) -> dict:
        """Plain-data copy of the full scheduler state, for comparison."""
        return {
            "rungs": {level: [list(entry) for entry in entries] for level, entries in self._rungs.items()},
            "trial_status": {tid: status.value for tid, status in self._status.items()},
            "last_resource": dict(self._last_resource),
            "decisions": [
                [rec.index, rec.trial_id, rec.resource, rec.decision.value] for rec in self._decisions
            ],
        }

    # -- event handling --------------------------------------------------

    def add_trial(self, trial_id: int) -> None:
        if trial_id in self._status:
            raise SchedulerError(f"trial {trial_id} already registered")
        if len(self._status) >= self.config.num_trials:
            raise SchedulerError(f"trial budget of {self.config.num_trials} exhausted")
        self._status[trial_id] = TrialStatus.RUNNING
        self._last_resource[trial_id] = 0

    def record_and_decide(self, trial_id: int, resource: int, metric: float) -> Decision:
        """Accept one result and return the verdict for this trial.

        Rejects (without mutating any state) results for unknown or
        finished trials, non-increasing resources, resources beyond the
        maximum, and non-finite metrics.
        """
        status = self._status.get(trial_id)
        if status is None:
            raise SchedulerError(f"unknown trial {trial_id}")
        if status is not TrialStatus.RUNNING:
            raise SchedulerError(f"trial {trial_id} is {status.value}; no further results accepted")
        if not isinstance(resource, int) or isinstance(resource, bool):
            raise SchedulerError(f"resource must be an int, got {resource!r}")
        if resource <= self._last_resource[trial_id]:
            raise SchedulerError(
                f"trial {trial_id}: resource must increase "
                f"(got {resource} after {self._last_resource[trial_id]})"
            )
        if resource > self.config.max_resource:
            raise SchedulerError(
                f"trial {trial_id}: resource {resource} exceeds max_resource {self.config.max_resource}"
            )
        metric = float(metric)
        if not math.isfinite(metric):
            raise SchedulerError(f"trial {trial_id}: metric must be finite, got {metric}")

        self._last_resource[trial_id] = resource
        if resource in self._rungs:
            decision = self._decide_at_rung(trial_id, resource, metric)
        else:
            decision = Decision.CONTINUE
        if resource == self.config.max_resource:
            decision = Decision.COMPLETE

        if decision is Decision.STOP:
            self._status[trial_id] = TrialStatus.STOPPED
        elif decision is Decision.COMPLETE:
            self._status[trial_id] = TrialStatus.COMPLETED
        self._decisions.append(DecisionRecord(len(self._decisions), trial_id, resource, decision))
        return decision

    def _decide_at_rung(self, trial_id: int, level: int, metric: float) -> Decision:
        entries = self._rungs[level]
        rank = 1
        for _, other in entries:
            if self._better(other, metric) or other == metric:
                rank += 1
        entries.append((trial_id, metric))
        keep = math.ceil(len(entries) / self.config.reduction_factor)
        return Decision.CONTINUE if rank <= keep else Decision.STOP

    def _better(self, a: float, b: float) -> bool:
        return a > b if self.config.metric_mode == "max" else a < b

    # -- summaries --------------------------------------------------------

    def best_trial(self) -> Optional[BestTrial]:
        """Best entry of the highest populated rung (earliest wins ties)."""
        for level in reversed(self._rung_levels):
            entries = self._rungs[level]
            if not entries:
                continue
            best_id, best_metric = entries[0]
            for tid, metric in entries[1:]:
                if self._better(metric, best_metric):
                    best_id, best_metric = tid, metric
            return BestTrial(best_id, best_metric, level)
        return None
