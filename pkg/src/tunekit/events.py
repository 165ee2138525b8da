"""Append-only campaign event log (JSON lines) and deterministic replay.

Every state change in a campaign is recorded as one event line with a
contiguous index.  Replaying a log through a fresh scheduler must
reproduce every logged verdict; a mismatch means the log is corrupt or
was produced by different scheduler settings.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, List, Optional, Union

from .asha import AshaConfig, AshaScheduler
from .errors import EventLogError

__all__ = ["EVENT_KINDS", "CampaignEvent", "EventLog", "read_events", "replay_scheduler"]

EVENT_KINDS = (
    "trial_sampled",
    "trial_started",
    "result",
    "decision",
    "trial_done",
    "trial_failed",
    "campaign_done",
)


@dataclass(frozen=True)
class CampaignEvent:
    index: int
    timestamp: float
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"index": self.index, "timestamp": self.timestamp, "kind": self.kind, **self.payload}

    @classmethod
    def from_dict(cls, obj: dict, where: str = "event") -> "CampaignEvent":
        if not isinstance(obj, dict):
            raise EventLogError(f"{where}: event must be a JSON object")
        for key in ("index", "timestamp", "kind"):
            if key not in obj:
                raise EventLogError(f"{where}: missing field {key!r}")
        kind = obj["kind"]
        if kind not in EVENT_KINDS:
            raise EventLogError(f"{where}: unknown event kind {kind!r}")
        index = obj["index"]
        if not isinstance(index, int) or isinstance(index, bool) or index < 0:
            raise EventLogError(f"{where}: index must be a non-negative int, got {index!r}")
        payload = {k: v for k, v in obj.items() if k not in ("index", "timestamp", "kind")}
        return cls(index, float(obj["timestamp"]), kind, payload)


class EventLog:
    """Writer that flushes one JSON line per event."""

    def __init__(self, path: Union[str, Path]) -> None:
        self.path = Path(path)
        self._fh: Optional[IO[str]] = open(self.path, "w", encoding="utf-8")
        self._next_index = 0

    def append(self, kind: str, **payload) -> CampaignEvent:
        if self._fh is None:
            raise EventLogError("event log is closed")
        if kind not in EVENT_KINDS:
            raise EventLogError(f"unknown event kind {kind!r}")
        event = CampaignEvent(self._next_index, time.time(), kind, payload)
        self._fh.write(json.dumps(event.to_dict(), allow_nan=False) + "\n")
        self._fh.flush()
        self._next_index += 1
        return event

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_events(path: Union[str, Path]) -> List[CampaignEvent]:
    """Load a log, checking JSON validity and contiguous indices."""
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise EventLogError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            events.append(CampaignEvent.from_dict(obj, where=f"{path}:{lineno}"))
    for position, event in enumerate(events):
        if event.index != position:
            raise EventLogError(
                f"{path}: event indices must be contiguous from 0; "
                f"saw {event.index} at position {position}"
            )
    return events


def replay_scheduler(events: Iterable[CampaignEvent], config: AshaConfig) -> AshaScheduler:
    """Rebuild scheduler state from a log, verifying every logged verdict.

    Only ``trial_started``, ``result``, and ``decision`` events drive
    the scheduler; a ``decision`` event must match what the rebuilt
    scheduler decides for the preceding ``result``.
    """
    scheduler = AshaScheduler(config)
    pending: Optional[tuple] = None  # (trial_id, resource, verdict) awaiting its decision event
    for event in events:
        if event.kind == "trial_started":
            scheduler.add_trial(int(event.payload["trial_id"]))
        elif event.kind == "result":
            trial_id = int(event.payload["trial_id"])
            resource = int(event.payload["epoch"])
            verdict = scheduler.record_and_decide(trial_id, resource, float(event.payload["metric"]))
            pending = (trial_id, resource, verdict.value)
        elif event.kind == "decision":
            logged = (
                int(event.payload["trial_id"]),
                int(event.payload["resource"]),
                str(event.payload["decision"]),
            )
            if pending is None or logged != pending:
                raise EventLogError(
                    f"event {event.index}: logged decision {logged} does not match "
                    f"replayed decision {pending}"
                )
            pending = None
    return scheduler
