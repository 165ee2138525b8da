"""JSON-lines wire protocol between the campaign driver and workers.

One message per line.  The driver sends ``start`` and, after every
``result``, exactly one ``decision`` ("continue" or "stop"); the worker
sends ``result`` per epoch, ``done`` when its trial ends, and ``error``
on failure.  Workers may also serve ``score`` requests (raw RGB pixels,
base64) with ``logits`` replies, used for prediction after training.

Decoding is strict: unknown types, missing or extra fields, wrong
scalar types, and non-finite numbers are all rejected.
"""

from __future__ import annotations

import base64
import binascii
import json
import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .errors import ProtocolError
from .space import TrialConfig

__all__ = [
    "StartMessage",
    "DecisionMessage",
    "ResultMessage",
    "DoneMessage",
    "ErrorMessage",
    "ScoreRequest",
    "LogitsReply",
    "Message",
    "encode_message",
    "decode_message",
    "encode_pixels",
    "decode_pixels",
]


@dataclass(frozen=True)
class StartMessage:
    trial_id: int
    config: TrialConfig
    max_epochs: int
    seed: int


@dataclass(frozen=True)
class DecisionMessage:
    trial_id: int
    action: str  # "continue" | "stop"


@dataclass(frozen=True)
class ResultMessage:
    trial_id: int
    epoch: int
    metric: float


@dataclass(frozen=True)
class DoneMessage:
    trial_id: int
    final_metric: float


@dataclass(frozen=True)
class ErrorMessage:
    trial_id: int
    message: str


@dataclass(frozen=True)
class ScoreRequest:
    request_id: int
    height: int
    width: int
    pixels: str  # base64 of H*W*3 RGB bytes, row-major


@dataclass(frozen=True)
class LogitsReply:
    request_id: int
    values: Tuple[float, ...]


Message = Union[
    StartMessage, DecisionMessage, ResultMessage, DoneMessage, ErrorMessage, ScoreRequest, LogitsReply
]


def _require_int(obj: dict, key: str) -> int:
    value = obj.get(key)
    if not isinstance(value, int) or isinstance(value, bool):
        raise ProtocolError(f"field {key!r} must be an integer, got {value!r}")
    return value


def _require_float(obj: dict, key: str) -> float:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(f"field {key!r} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ProtocolError(f"field {key!r} must be finite, got {value}")
    return value


def _require_str(obj: dict, key: str) -> str:
    value = obj.get(key)
    if not isinstance(value, str):
        raise ProtocolError(f"field {key!r} must be a string, got {value!r}")
    return value


def _require_fields(obj: dict, *fields: str) -> None:
    expected = set(fields) | {"type"}
    missing = sorted(expected - obj.keys())
    if missing:
        raise ProtocolError(f"{obj.get('type', '?')} message missing fields: {missing}")
    extra = sorted(obj.keys() - expected)
    if extra:
        raise ProtocolError(f"{obj.get('type', '?')} message has unknown fields: {extra}")


def encode_message(message: Message) -> str:
    """Serialize to one JSON line (no trailing newline)."""
    if isinstance(message, StartMessage):
        obj = {
            "type": "start",
            "trial_id": message.trial_id,
            "config": message.config.to_dict(),
            "max_epochs": message.max_epochs,
            "seed": message.seed,
        }
    elif isinstance(message, DecisionMessage):
        if message.action not in ("continue", "stop"):
            raise ProtocolError(f"decision action must be 'continue' or 'stop', got {message.action!r}")
        obj = {"type": "decision", "trial_id": message.trial_id, "action": message.action}
    elif isinstance(message, ResultMessage):
        obj = {
            "type": "result",
            "trial_id": message.trial_id,
            "epoch": message.epoch,
            "metric": float(message.metric),
        }
    elif isinstance(message, DoneMessage):
        obj = {"type": "done", "trial_id": message.trial_id, "final_metric": float(message.final_metric)}
    elif isinstance(message, ErrorMessage):
        obj = {"type": "error", "trial_id": message.trial_id, "message": message.message}
    elif isinstance(message, ScoreRequest):
        obj = {
            "type": "score",
            "request_id": message.request_id,
            "height": message.height,
            "width": message.width,
            "pixels": message.pixels,
        }
    elif isinstance(message, LogitsReply):
        obj = {
            "type": "logits",
            "request_id": message.request_id,
            "values": [float(v) for v in message.values],
        }
    else:
        raise ProtocolError(f"cannot encode object of type {type(message).__name__}")
    try:
        return json.dumps(obj, allow_nan=False, separators=(",", ":"))
    except ValueError as exc:
        raise ProtocolError(f"message contains non-finite numbers: {exc}") from exc


def decode_message(line: str) -> Message:
    """Parse and validate one line; raises ProtocolError on any defect."""
    line = line.strip()
    if not line:
        raise ProtocolError("empty line")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ProtocolError(f"message must be a JSON object, got {type(obj).__name__}")
    kind = obj.get("type")

    if kind == "start":
        _require_fields(obj, "trial_id", "config", "max_epochs", "seed")
        config = obj["config"]
        if not isinstance(config, dict):
            raise ProtocolError(f"field 'config' must be an object, got {config!r}")
        try:
            parsed = TrialConfig.from_dict(config)
        except Exception as exc:
            raise ProtocolError(f"invalid config: {exc}") from exc
        max_epochs = _require_int(obj, "max_epochs")
        if max_epochs < 1:
            raise ProtocolError(f"max_epochs must be >= 1, got {max_epochs}")
        return StartMessage(_require_int(obj, "trial_id"), parsed, max_epochs, _require_int(obj, "seed"))
    if kind == "decision":
        _require_fields(obj, "trial_id", "action")
        action = _require_str(obj, "action")
        if action not in ("continue", "stop"):
            raise ProtocolError(f"unknown decision action {action!r}")
        return DecisionMessage(_require_int(obj, "trial_id"), action)
    if kind == "result":
        _require_fields(obj, "trial_id", "epoch", "metric")
        epoch = _require_int(obj, "epoch")
        if epoch < 1:
            raise ProtocolError(f"epoch must be >= 1, got {epoch}")
        return ResultMessage(_require_int(obj, "trial_id"), epoch, _require_float(obj, "metric"))
    if kind == "done":
        _require_fields(obj, "trial_id", "final_metric")
        return DoneMessage(_require_int(obj, "trial_id"), _require_float(obj, "final_metric"))
    if kind == "error":
        _require_fields(obj, "trial_id", "message")
        return ErrorMessage(_require_int(obj, "trial_id"), _require_str(obj, "message"))
    if kind == "score":
        _require_fields(obj, "request_id", "height", "width", "pixels")
        height = _require_int(obj, "height")
        width = _require_int(obj, "width")
        if height < 1 or width < 1:
            raise ProtocolError(f"score size must be positive, got {height}x{width}")
        pixels = _require_str(obj, "pixels")
        decode_pixels(pixels, height, width)  # validate early
        return ScoreRequest(_require_int(obj, "request_id"), height, width, pixels)
    if kind == "logits":
        _require_fields(obj, "request_id", "values")
        values = obj["values"]
        if not isinstance(values, list) or not values:
            raise ProtocolError(f"field 'values' must be a non-empty list, got {values!r}")
        out = []
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(float(v)):
                raise ProtocolError(f"logit values must be finite numbers, got {v!r}")
            out.append(float(v))
        return LogitsReply(_require_int(obj, "request_id"), tuple(out))
    raise ProtocolError(f"unknown message type {kind!r}")


def encode_pixels(image: np.ndarray) -> str:
    """Base64 of row-major RGB bytes for a (H, W, 3) uint8 array."""
    if not isinstance(image, np.ndarray) or image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
        raise ProtocolError("pixels must come from an (H, W, 3) uint8 array")
    return base64.b64encode(np.ascontiguousarray(image).tobytes()).decode("ascii")


def decode_pixels(data: str, height: int, width: int) -> np.ndarray:
    try:
        raw = base64.b64decode(data, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise ProtocolError(f"pixels are not valid base64: {exc}") from exc
    expected = height * width * 3
    if len(raw) != expected:
        raise ProtocolError(f"pixel payload has {len(raw)} bytes, expected {expected}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
