"""Trial executors: things that turn a configuration into epoch metrics.

Three interchangeable backends expose the same session interface:

* ``SyntheticExecutor`` — a closed-form objective with a known optimum
  and bounded noise; instant, used for scheduler studies.
* ``LogisticExecutor`` — logistic regression trained with SGD/momentum
  and cosine annealing on two Gaussian blobs; a real training loop with
  a known Bayes-optimal reference.
* ``ExternalExecutor`` — drives worker subprocesses over the JSON-lines
  protocol, reusing each process for consecutive trials.

A session yields one ``EpochResult`` per ``next_result`` call and is
closed with ``stop()``, which returns the trial's final metric.  The
driver sends exactly one continue/stop verdict per result, so workers
stay in lock step with the scheduler.
"""

from __future__ import annotations

import math
import queue
import subprocess
import threading
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ProtocolError, TrialDiverged, WorkerError
from .optim import OptimizerConfig, cosine_lr, sgd_momentum_step
from .protocol import (
    DecisionMessage,
    DoneMessage,
    ErrorMessage,
    LogitsReply,
    Message,
    ResultMessage,
    ScoreRequest,
    StartMessage,
    decode_message,
    encode_message,
    encode_pixels,
)
from .space import TrialConfig

__all__ = [
    "EpochResult",
    "TrialSession",
    "Executor",
    "SyntheticExecutor",
    "LogisticExecutor",
    "ExternalExecutor",
    "make_executor",
    "synthetic_metric",
    "synthetic_plateau",
    "BlobsData",
    "make_blobs",
    "expand_features",
    "logistic_loss_and_grad",
    "logistic_accuracy",
    "bayes_accuracy",
]

# Tuning optimum the synthetic objective is centered on.
_BEST_LR = 1.98e-3
_BEST_WD = 4.21e-4
_BEST_N = 2
_M_CHOICES = (2, 6, 10, 14)
_PLATEAU_CEILING = 0.70
_BONUS_STEP = 0.2
_NOISE_HALF_WIDTH = 0.005
_RISE_TIME = 20.0

# Stream tags for deriving independent generators from one campaign seed.
_NOISE_STREAM = 101
_DATA_STREAM = 202


@dataclass(frozen=True)
class EpochResult:
    trial_id: int
    epoch: int
    metric: float


# -- synthetic objective -----------------------------------------------------


def synthetic_plateau(config: TrialConfig) -> float:
    """Noise-free asymptote of the synthetic objective for a config."""
    lr_term = math.exp(-((math.log10(config.learning_rate) - math.log10(_BEST_LR)) ** 2) / 2.0)
    wd_term = math.exp(-((math.log10(config.weight_decay) - math.log10(_BEST_WD)) ** 2) / 8.0)
    if config.randaugment_m in _M_CHOICES:
        m_distance = abs(_M_CHOICES.index(config.randaugment_m) - (len(_M_CHOICES) - 1))
    else:
        m_distance = len(_M_CHOICES) - 1
    bonus = 1.0 - _BONUS_STEP * abs(config.randaugment_n - _BEST_N) - _BONUS_STEP * m_distance
    return _PLATEAU_CEILING * lr_term * wd_term * max(bonus, 0.0)


def synthetic_metric(config: TrialConfig, epoch: int, campaign_seed: int, trial_id: int) -> float:
    """Plateau approached with rise time 20 epochs plus bounded noise.

    The noise term is a deterministic function of (campaign seed, trial
    id, epoch), so any replay of the same campaign sees identical
    metrics regardless of arrival order.
    """
    if epoch < 1:
        raise ValueError(f"epoch must be >= 1, got {epoch}")
    rng = np.random.default_rng(np.random.SeedSequence([campaign_seed, _NOISE_STREAM, trial_id, epoch]))
    noise = rng.uniform(-_NOISE_HALF_WIDTH, _NOISE_HALF_WIDTH)
    return synthetic_plateau(config) * (1.0 - math.exp(-epoch / _RISE_TIME)) + noise


# -- sessions ----------------------------------------------------------------


class TrialSession:
    """One running trial; produces epoch results until stopped."""

    def __init__(self, trial_id: int) -> None:
        self.trial_id = trial_id
        self.closed = False

    def next_result(self, timeout: Optional[float] = None) -> EpochResult:
        raise NotImplementedError

    def stop(self, timeout: Optional[float] = None) -> float:
        """Finish the trial (early or at the horizon); returns final metric."""
        raise NotImplementedError

    def score(self, sample) -> np.ndarray:
        """Logits of the trained model for one sample (after training)."""
        raise NotImplementedError


class Executor:
    """Factory for trial sessions."""

    def start_trial(
        self, trial_id: int, config: TrialConfig, max_epochs: int, seed: int
    ) -> TrialSession:
        raise NotImplementedError

    def close(self) -> None:
        pass


class _SyntheticSession(TrialSession):
    def __init__(self, trial_id: int, config: TrialConfig, max_epochs: int, campaign_seed: int) -> None:
        super().__init__(trial_id)
        self._config = config
        self._max_epochs = max_epochs
        self._campaign_seed = campaign_seed
        self._epoch = 0
        self._last_metric = float("nan")

    def next_result(self, timeout: Optional[float] = None) -> EpochResult:
        if self.closed:
            raise WorkerError(f"trial {self.trial_id}: session already closed")
        if self._epoch >= self._max_epochs:
            raise WorkerError(f"trial {self.trial_id}: past the epoch horizon")
        self._epoch += 1
        self._last_metric = synthetic_metric(self._config, self._epoch, self._campaign_seed, self.trial_id)
        return EpochResult(self.trial_id, self._epoch, self._last_metric)

    def stop(self, timeout: Optional[float] = None) -> float:
        self.closed = True
        return self._last_metric


class SyntheticExecutor(Executor):
    def __init__(self, campaign_seed: int, variant: bool = False) -> None:
        # variant has no effect here; accepted so executors are interchangeable
        self.campaign_seed = int(campaign_seed)
        self.variant = variant

    def start_trial(self, trial_id, config, max_epochs, seed) -> TrialSession:
        return _SyntheticSession(trial_id, config, max_epochs, self.campaign_seed)


# -- logistic regression on Gaussian blobs -----------------------------------


@dataclass(frozen=True)
class BlobsData:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    separation: float


def make_blobs(
    seed: int,
    n_train: int = 256,
    n_val: int = 256,
    n_test: int = 512,
    separation: float = 2.0,
) -> BlobsData:
    """Two isotropic Gaussians with means ``±separation/sqrt(2) * (1, 1)``.

    Class labels are balanced exactly.  The Bayes-optimal separator is
    the perpendicular bisector of the means, with accuracy
    ``Phi(separation)``.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, _DATA_STREAM]))
    center = separation / math.sqrt(2.0) * np.ones(2)

    def split(n: int) -> Tuple[np.ndarray, np.ndarray]:
        half = n // 2
        y = np.concatenate([np.zeros(n - half, dtype=int), np.ones(half, dtype=int)])
        x = rng.normal(size=(n, 2)) + np.where(y[:, None] == 1, center, -center)
        return x, y

    x_train, y_train = split(n_train)
    x_val, y_val = split(n_val)
    x_test, y_test = split(n_test)
    return BlobsData(x_train, y_train, x_val, y_val, x_test, y_test, separation)


def bayes_accuracy(separation: float) -> float:
    """Accuracy of the optimal separator on the blob distribution."""
    return 0.5 * (1.0 + math.erf(separation / math.sqrt(2.0)))


def expand_features(x: np.ndarray, variant: bool) -> np.ndarray:
    """Raw coordinates, or quadratic expansion for the wider variant."""
    if not variant:
        return x
    return np.column_stack([x[:, 0], x[:, 1], x[:, 0] ** 2, x[:, 1] ** 2, x[:, 0] * x[:, 1]])


def logistic_loss_and_grad(
    params: np.ndarray, x: np.ndarray, y: np.ndarray
) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient; ``params = [weights..., bias]``.

    Regularization is not included here; weight decay is applied by the
    optimizer step (coupled L2 over all parameters including the bias).
    """
    w, b = params[:-1], params[-1]
    z = x @ w + b
    # log(1 + exp(z)) computed stably
    loss = float(np.mean(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - y * z))
    p = 1.0 / (1.0 + np.exp(-z))
    dz = (p - y) / len(y)
    grad = np.concatenate([x.T @ dz, [dz.sum()]])
    return loss, grad


def logistic_accuracy(params: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    z = x @ params[:-1] + params[-1]
    return float(((z > 0).astype(int) == y).mean())


class _LogisticSession(TrialSession):
    def __init__(
        self,
        trial_id: int,
        config: TrialConfig,
        max_epochs: int,
        seed: int,
        data: BlobsData,
        variant: bool,
        combined: bool,
    ) -> None:
        super().__init__(trial_id)
        self._config = config
        self._max_epochs = max_epochs
        self._rng = np.random.default_rng(seed)
        if combined:
            self._x_fit = expand_features(np.concatenate([data.x_train, data.x_val]), variant)
            self._y_fit = np.concatenate([data.y_train, data.y_val])
            self._x_eval = expand_features(data.x_test, variant)
            self._y_eval = data.y_test
        else:
            self._x_fit = expand_features(data.x_train, variant)
            self._y_fit = data.y_train
            self._x_eval = expand_features(data.x_val, variant)
            self._y_eval = data.y_val
        dim = self._x_fit.shape[1] + 1
        self._params = self._rng.normal(0.0, 0.01, size=dim)
        self._velocity = np.zeros(dim)
        self._opt = OptimizerConfig(
            initial_lr=config.learning_rate,
            weight_decay=config.weight_decay,
            total_steps=max_epochs,
        )
        self._epoch = 0
        self._last_metric = float("nan")

    def next_result(self, timeout: Optional[float] = None) -> EpochResult:
        if self.closed:
            raise WorkerError(f"trial {self.trial_id}: session already closed")
        if self._epoch >= self._max_epochs:
            raise WorkerError(f"trial {self.trial_id}: past the epoch horizon")
        lr = cosine_lr(self._epoch, self._opt)  # one rate per epoch
        self._epoch += 1
        order = self._rng.permutation(len(self._y_fit))
        batch = max(1, int(self._config.batch_size))
        for lo in range(0, len(order), batch):
            rows = order[lo : lo + batch]
            loss, grad = logistic_loss_and_grad(self._params, self._x_fit[rows], self._y_fit[rows])
            if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrialDiverged(f"trial {self.trial_id}: non-finite loss at epoch {self._epoch}")
            self._params, self._velocity = sgd_momentum_step(
                self._params, grad, self._velocity, lr, self._opt
            )
        self._last_metric = logistic_accuracy(self._params, self._x_eval, self._y_eval)
        return EpochResult(self.trial_id, self._epoch, self._last_metric)

    def stop(self, timeout: Optional[float] = None) -> float:
        self.closed = True
        return self._last_metric

    def score(self, sample) -> np.ndarray:
        """Two-class logits ``[0, z]`` so softmax reproduces the model."""
        x = np.asarray(sample, dtype=float).reshape(1, -1)
        z = float(x @ self._params[:-1] + self._params[-1])
        return np.array([0.0, z])

    @property
    def params(self) -> np.ndarray:
        return self._params.copy()


class LogisticExecutor(Executor):
    def __init__(
        self,
        campaign_seed: int,
        n_train: int = 256,
        n_val: int = 256,
        n_test: int = 512,
        separation: float = 2.0,
        variant: bool = False,
        combined: bool = False,
    ) -> None:
        self.campaign_seed = int(campaign_seed)
        self.variant = variant
        self.combined = combined
        self.data = make_blobs(self.campaign_seed, n_train, n_val, n_test, separation)

    def start_trial(self, trial_id, config, max_epochs, seed) -> TrialSession:
        return _LogisticSession(
            trial_id, config, max_epochs, seed, self.data, self.variant, self.combined
        )


# -- external worker processes ------------------------------------------------


class _WorkerProcess:
    """A line-protocol subprocess with a background stdout reader."""

    def __init__(self, command: Sequence[str]) -> None:
        self.command = list(command)
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise WorkerError(f"cannot launch worker {self.command}: {exc}") from exc
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self) -> None:
        try:
            for line in self.proc.stdout:
                self._lines.put(line)
        finally:
            self._lines.put(None)

    def send(self, message: Message) -> None:
        try:
            self.proc.stdin.write(encode_message(message) + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise WorkerError(f"worker pipe closed while sending: {exc}") from exc

    def recv(self, timeout: Optional[float]) -> Message:
        try:
            line = self._lines.get(timeout=timeout)
        except queue.Empty:
            raise WorkerError(f"worker produced no output within {timeout}s") from None
        if line is None:
            raise WorkerError("worker closed its output stream")
        try:
            return decode_message(line)
        except ProtocolError as exc:
            raise WorkerError(f"undecodable worker message: {exc}") from exc

    def alive(self) -> bool:
        return self.proc.poll() is None

    def terminate(self) -> None:
        if self.alive():
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            self.proc.terminate()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


class _ExternalSession(TrialSession):
    def __init__(self, executor: "ExternalExecutor", worker: _WorkerProcess, start: StartMessage) -> None:
        super().__init__(start.trial_id)
        self._executor = executor
        self._worker = worker
        self._awaiting_decision = False
        self._last_metric = float("nan")
        self._next_request_id = 0
        worker.send(start)

    def _fail(self, reason: str) -> WorkerError:
        self._executor._discard(self._worker)
        self.closed = True
        return WorkerError(f"trial {self.trial_id}: {reason}")

    def next_result(self, timeout: Optional[float] = None) -> EpochResult:
        if self.closed:
            raise WorkerError(f"trial {self.trial_id}: session already closed")
        if self._awaiting_decision:
            self._worker.send(DecisionMessage(self.trial_id, "continue"))
            self._awaiting_decision = False
        try:
            message = self._worker.recv(timeout if timeout is not None else self._executor.epoch_timeout)
        except WorkerError as exc:
            raise self._fail(str(exc)) from None
        if isinstance(message, ErrorMessage):
            raise self._fail(f"worker reported: {message.message}")
        if not isinstance(message, ResultMessage) or message.trial_id != self.trial_id:
            raise self._fail(f"expected a result message, got {message!r}")
        self._awaiting_decision = True
        self._last_metric = message.metric
        return EpochResult(message.trial_id, message.epoch, message.metric)

    def stop(self, timeout: Optional[float] = None) -> float:
        if self.closed:
            return self._last_metric
        if not self._awaiting_decision:
            raise self._fail("stop requested with no result outstanding")
        self._worker.send(DecisionMessage(self.trial_id, "stop"))
        self._awaiting_decision = False
        try:
            message = self._worker.recv(timeout if timeout is not None else self._executor.epoch_timeout)
        except WorkerError as exc:
            raise self._fail(str(exc)) from None
        if isinstance(message, ErrorMessage):
            raise self._fail(f"worker reported: {message.message}")
        if not isinstance(message, DoneMessage) or message.trial_id != self.trial_id:
            raise self._fail(f"expected a done message, got {message!r}")
        self.closed = True
        self._last_metric = message.final_metric
        self._executor._release(self._worker)
        return message.final_metric

    def score(self, sample) -> np.ndarray:
        """Logits from the worker's last trained model for one RGB image."""
        if not self.closed:
            raise WorkerError(f"trial {self.trial_id}: scoring requires a finished trial")
        image = np.asarray(sample)
        request_id = self._next_request_id
        self._next_request_id += 1
        self._worker.send(
            ScoreRequest(request_id, image.shape[0], image.shape[1], encode_pixels(image))
        )
        message = self._worker.recv(self._executor.epoch_timeout)
        if not isinstance(message, LogitsReply) or message.request_id != request_id:
            raise self._fail(f"expected logits for request {request_id}, got {message!r}")
        return np.asarray(message.values, dtype=float)


class ExternalExecutor(Executor):
    """Runs trials on pooled worker subprocesses over the wire protocol."""

    def __init__(self, worker_command: Sequence[str], epoch_timeout: float = 600.0) -> None:
        if not worker_command:
            raise WorkerError("worker_command must be a non-empty argument list")
        self.worker_command = list(worker_command)
        self.epoch_timeout = float(epoch_timeout)
        self._idle: List[_WorkerProcess] = []
        self._all: List[_WorkerProcess] = []

    def start_trial(self, trial_id, config, max_epochs, seed) -> TrialSession:
        while self._idle:
            worker = self._idle.pop()
            if worker.alive():
                break
            self._discard(worker)
        else:
            worker = _WorkerProcess(self.worker_command)
            self._all.append(worker)
        return _ExternalSession(self, worker, StartMessage(trial_id, config, max_epochs, seed))

    def _release(self, worker: _WorkerProcess) -> None:
        if worker.alive():
            self._idle.append(worker)

    def _discard(self, worker: _WorkerProcess) -> None:
        worker.terminate()
        if worker in self._idle:
            self._idle.remove(worker)
        if worker in self._all:
            self._all.remove(worker)

    def close(self) -> None:
        for worker in list(self._all):
            worker.terminate()
        self._idle.clear()
        self._all.clear()


def make_executor(
    kind: str,
    campaign_seed: int,
    worker_command: Optional[Sequence[str]] = None,
    epoch_timeout: float = 600.0,
    variant: bool = False,
    combined: bool = False,
) -> Executor:
    if kind == "synthetic":
        return SyntheticExecutor(campaign_seed, variant=variant)
    if kind == "logistic":
        return LogisticExecutor(campaign_seed, variant=variant, combined=combined)
    if kind == "external":
        if not worker_command:
            raise WorkerError("external executor needs worker_command")
        return ExternalExecutor(worker_command, epoch_timeout=epoch_timeout)
    raise WorkerError(f"unknown executor kind {kind!r}")
