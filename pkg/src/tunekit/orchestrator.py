"""Campaign orchestration: sampling, scheduling, logging, final training.

``run_campaign`` drives ``num_trials`` configurations through an
executor under the successive-halving scheduler, appending every state
change to a JSON-lines event log.  The driver sweeps active sessions in
start order (round-robin), so event order is deterministic for a given
seed even with several trials in flight.  Trial failures are logged and
consume their trial slot; the campaign continues.

All randomness derives from one campaign seed through tagged seed
sequences, so sampling, trial seeds, and final-run seeds are mutually
independent and individually reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from .asha import AshaConfig, AshaScheduler, BestTrial, Decision
from .ensemble import ModelPredictions, ensemble_accuracy
from .errors import SchedulerError, TrialDiverged, TunekitError, WorkerError
from .events import EventLog, read_events
from .executor import Executor, expand_features, make_executor
from .space import SearchSpace, TrialConfig, default_search_space, sample_config
from .tta import aggregate_predictions

__all__ = [
    "CampaignConfig",
    "CampaignResult",
    "run_campaign",
    "FinalRun",
    "FinalTrainResult",
    "final_train",
    "AblationRow",
    "ABLATION_STEPS",
    "run_ablation",
    "report",
]

# Stream tags keeping the campaign's random streams independent.
_SAMPLE_STREAM = 11
_TRIAL_SEED_STREAM = 12
_FINAL_STREAM = 13

_EXECUTOR_KINDS = ("synthetic", "logistic", "external")


@dataclass(frozen=True)
class CampaignConfig:
    seed: int
    asha: AshaConfig
    space: SearchSpace = field(default_factory=default_search_space)
    executor: str = "synthetic"
    worker_command: Optional[Tuple[str, ...]] = None
    parallelism: int = 1
    epoch_timeout: float = 600.0
    final_runs: int = 20
    final_epochs_multiplier: int = 2
    combined_final: bool = True

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise TunekitError(f"seed must be a non-negative int, got {self.seed!r}")
        if self.executor not in _EXECUTOR_KINDS:
            raise TunekitError(f"executor must be one of {_EXECUTOR_KINDS}, got {self.executor!r}")
        if self.executor == "external" and not self.worker_command:
            raise TunekitError("external executor requires worker_command")
        if self.parallelism < 1:
            raise TunekitError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.epoch_timeout <= 0:
            raise TunekitError(f"epoch_timeout must be positive, got {self.epoch_timeout}")
        if self.final_runs < 1:
            raise TunekitError(f"final_runs must be >= 1, got {self.final_runs}")
        if self.final_epochs_multiplier < 1:
            raise TunekitError(f"final_epochs_multiplier must be >= 1, got {self.final_epochs_multiplier}")
        if self.worker_command is not None:
            object.__setattr__(self, "worker_command", tuple(self.worker_command))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "asha": {
                "grace_period": self.asha.grace_period,
                "max_resource": self.asha.max_resource,
                "num_trials": self.asha.num_trials,
                "reduction_factor": self.asha.reduction_factor,
                "metric_mode": self.asha.metric_mode,
            },
            "space": self.space.to_dict(),
            "executor": self.executor,
            "worker_command": list(self.worker_command) if self.worker_command else None,
            "parallelism": self.parallelism,
            "epoch_timeout": self.epoch_timeout,
            "final_runs": self.final_runs,
            "final_epochs_multiplier": self.final_epochs_multiplier,
            "combined_final": self.combined_final,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CampaignConfig":
        if not isinstance(data, dict):
            raise TunekitError(f"campaign config must be a mapping, got {type(data).__name__}")
        known = {
            "seed",
            "asha",
            "space",
            "executor",
            "worker_command",
            "parallelism",
            "epoch_timeout",
            "final_runs",
            "final_epochs_multiplier",
            "combined_final",
        }
        unknown = sorted(set(data) - known)
        if unknown:
            raise TunekitError(f"unknown campaign config keys: {unknown}")
        if "asha" not in data:
            raise TunekitError("campaign config requires an 'asha' section")
        asha = AshaConfig(**data["asha"])
        space = SearchSpace.from_dict(data["space"]) if "space" in data else default_search_space()
        kwargs = {k: v for k, v in data.items() if k not in ("asha", "space")}
        if kwargs.get("worker_command") is not None:
            kwargs["worker_command"] = tuple(str(part) for part in kwargs["worker_command"])
        return cls(asha=asha, space=space, **kwargs)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "CampaignConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
        return cls.from_dict(data)


def trial_seed(campaign_seed: int, trial_id: int) -> int:
    """Independent per-trial seed, stable across driver implementations."""
    return int(np.random.SeedSequence([campaign_seed, _TRIAL_SEED_STREAM, trial_id]).generate_state(1)[0])


def _sampling_rng(campaign_seed: int, trial_id: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([campaign_seed, _SAMPLE_STREAM, trial_id]))


@dataclass
class CampaignResult:
    best_trial_id: Optional[int]
    best_config: Optional[TrialConfig]
    best_metric: Optional[float]
    best_resource: Optional[int]
    events_path: Path
    n_trials: int
    n_failed: int
    trial_configs: Dict[int, TrialConfig]
    scheduler: AshaScheduler


def run_campaign(
    config: CampaignConfig,
    out_dir: Union[str, Path],
    executor: Optional[Executor] = None,
) -> CampaignResult:
    """Run one tuning campaign; returns the best surviving trial.

    ``executor`` overrides the config-built one (used for injecting
    preconfigured executors; tests rely on it).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    events_path = out_dir / "events.jsonl"

    owns_executor = executor is None
    if executor is None:
        executor = make_executor(
            config.executor,
            config.seed,
            worker_command=config.worker_command,
            epoch_timeout=config.epoch_timeout,
        )

    scheduler = AshaScheduler(config.asha)
    trial_configs: Dict[int, TrialConfig] = {}
    n_failed = 0
    active: List = []  # sessions in start order
    next_trial_id = 0
    num_trials = config.asha.num_trials
    max_epochs = config.asha.max_resource

    with EventLog(events_path) as log:
        try:
            while active or next_trial_id < num_trials:
                while len(active) < config.parallelism and next_trial_id < num_trials:
                    tid = next_trial_id
                    next_trial_id += 1
                    trial_config = sample_config(config.space, _sampling_rng(config.seed, tid))
                    seed = trial_seed(config.seed, tid)
                    trial_configs[tid] = trial_config
                    log.append("trial_sampled", trial_id=tid, config=trial_config.to_dict(), seed=seed)
                    scheduler.add_trial(tid)
                    log.append("trial_started", trial_id=tid)
                    try:
                        session = executor.start_trial(tid, trial_config, max_epochs, seed)
                    except (WorkerError, TrialDiverged) as exc:
                        n_failed += 1
                        log.append("trial_failed", trial_id=tid, reason=str(exc))
                        continue
                    active.append(session)

                finished = []
                for session in list(active):
                    try:
                        result = session.next_result(config.epoch_timeout)
                        verdict = scheduler.record_and_decide(
                            session.trial_id, result.epoch, result.metric
                        )
                        log.append(
                            "result", trial_id=result.trial_id, epoch=result.epoch, metric=result.metric
                        )
                        log.append(
                            "decision",
                            trial_id=result.trial_id,
                            resource=result.epoch,
                            decision=verdict.value,
                        )
                        if verdict is not Decision.CONTINUE:
                            final_metric = session.stop(config.epoch_timeout)
                            status = "completed" if verdict is Decision.COMPLETE else "stopped"
                            log.append(
                                "trial_done",
                                trial_id=result.trial_id,
                                status=status,
                                final_epoch=result.epoch,
                                final_metric=final_metric,
                            )
                            finished.append(session)
                    except (WorkerError, TrialDiverged, SchedulerError) as exc:
                        n_failed += 1
                        log.append("trial_failed", trial_id=session.trial_id, reason=str(exc))
                        finished.append(session)
                for session in finished:
                    active.remove(session)

            best = scheduler.best_trial()
            log.append(
                "campaign_done",
                best_trial_id=best.trial_id if best else None,
                best_metric=best.metric if best else None,
                best_resource=best.resource if best else None,
                best_config=trial_configs[best.trial_id].to_dict() if best else None,
            )
        finally:
            if owns_executor:
                executor.close()

    return CampaignResult(
        best_trial_id=best.trial_id if best else None,
        best_config=trial_configs[best.trial_id] if best else None,
        best_metric=best.metric if best else None,
        best_resource=best.resource if best else None,
        events_path=events_path,
        n_trials=next_trial_id,
        n_failed=n_failed,
        trial_configs=trial_configs,
        scheduler=scheduler,
    )


# -- final training ------------------------------------------------------------


@dataclass(frozen=True)
class FinalRun:
    run_id: int
    seed: int
    final_metric: float
    epochs: int


@dataclass
class FinalTrainResult:
    runs: List[FinalRun]
    predictions: List[ModelPredictions]
    ensemble_metric: Optional[float]
    epochs: int


def final_train(
    config: CampaignConfig,
    best_config: TrialConfig,
    runs: Optional[int] = None,
    executor: Optional[Executor] = None,
    use_tta: bool = False,
    n_views: int = 30,
) -> FinalTrainResult:
    """Retrain the winning configuration from independent seeds.

    Runs train for ``max_resource * final_epochs_multiplier`` epochs,
    by default on the combined (train + validation) split, and each
    failed run is skipped.  Executors with an internal evaluation split
    also contribute per-sample probabilities, enabling an ensemble
    metric over all surviving runs.
    """
    runs = config.final_runs if runs is None else runs
    horizon = config.asha.max_resource * config.final_epochs_multiplier
    owns_executor = executor is None
    if executor is None:
        executor = make_executor(
            config.executor,
            config.seed,
            worker_command=config.worker_command,
            epoch_timeout=config.epoch_timeout,
            combined=config.combined_final,
        )
    final_runs: List[FinalRun] = []
    predictions: List[ModelPredictions] = []
    try:
        for run_id in range(runs):
            seed = int(
                np.random.SeedSequence([config.seed, _FINAL_STREAM, run_id]).generate_state(1)[0]
            )
            try:
                session = executor.start_trial(run_id, best_config, horizon, seed)
                result = None
                for _ in range(horizon):
                    result = session.next_result(config.epoch_timeout)
                final_metric = session.stop(config.epoch_timeout)
            except (WorkerError, TrialDiverged):
                continue
            final_runs.append(FinalRun(run_id, seed, final_metric, result.epoch if result else 0))
            member = _collect_predictions(executor, session, f"run-{run_id}", use_tta, n_views)
            if member is not None:
                predictions.append(member)
    finally:
        if owns_executor:
            executor.close()
    if not final_runs:
        raise TunekitError("every final training run failed")
    ens = ensemble_accuracy(predictions, _eval_labels(executor)) if predictions else None
    return FinalTrainResult(final_runs, predictions, ens, horizon)


def _collect_predictions(executor, session, model_id: str, use_tta: bool, n_views: int):
    """Per-sample probabilities for executors with an internal eval split."""
    samples = _eval_samples(executor)
    if samples is None:
        return None
    probs = {}
    for sample_id, x in samples:
        logits = session.score(x)
        views = [logits] * (n_views if use_tta else 1)  # identity views for vector data
        probs[sample_id] = aggregate_predictions(views)
    return ModelPredictions(model_id, probs)


def _eval_samples(executor) -> Optional[List[Tuple[str, np.ndarray]]]:
    data = getattr(executor, "data", None)
    if data is None:
        return None
    x = expand_features(data.x_test if executor.combined else data.x_val, executor.variant)
    return [(f"s{i}", x[i]) for i in range(len(x))]


def _eval_labels(executor) -> Dict[str, int]:
    data = executor.data
    y = data.y_test if executor.combined else data.y_val
    return {f"s{i}": int(y[i]) for i in range(len(y))}


# -- ablation -------------------------------------------------------------------


ABLATION_STEPS = ("combined-split", "doubled-epochs", "wider-model", "tta", "ensemble")


@dataclass(frozen=True)
class AblationRow:
    name: str
    metric: float
    runs: int


def run_ablation(
    config: CampaignConfig,
    best_config: TrialConfig,
    steps: Sequence[str] = ABLATION_STEPS,
    ensemble_runs: int = 5,
) -> List[AblationRow]:
    """Add the pipeline's ingredients one at a time, cumulatively.

    The baseline trains one model on the train split for the campaign
    horizon.  Each step keeps every earlier ingredient.  Only executors
    with an internal evaluation split are supported.
    """
    unknown = sorted(set(steps) - set(ABLATION_STEPS))
    if unknown:
        raise TunekitError(f"unknown ablation steps: {unknown}")
    if config.executor == "external":
        raise TunekitError("ablation requires an in-process executor")

    enabled = set()
    rows = []

    def measure(name: str) -> AblationRow:
        multiplier = config.final_epochs_multiplier if "doubled-epochs" in enabled else 1
        sub = CampaignConfig(
            seed=config.seed,
            asha=config.asha,
            space=config.space,
            executor=config.executor,
            parallelism=1,
            epoch_timeout=config.epoch_timeout,
            final_runs=config.final_runs,
            final_epochs_multiplier=multiplier,
            combined_final="combined-split" in enabled,
        )
        executor = make_executor(
            config.executor,
            config.seed,
            variant="wider-model" in enabled,
            combined="combined-split" in enabled,
        )
        n_runs = ensemble_runs if "ensemble" in enabled else 1
        result = final_train(
            sub,
            best_config,
            runs=n_runs,
            executor=executor,
            use_tta="tta" in enabled,
        )
        if "ensemble" in enabled and result.ensemble_metric is not None:
            metric = result.ensemble_metric
        else:
            metric = result.runs[0].final_metric
        return AblationRow(name, metric, n_runs)

    rows.append(measure("baseline"))
    for step in ABLATION_STEPS:
        if step not in steps:
            continue
        enabled.add(step)
        rows.append(measure(f"+{step}"))
    return rows


# -- reporting --------------------------------------------------------------------


def report(events_path: Union[str, Path]) -> str:
    """Human-readable campaign summary assembled from the event log."""
    events = read_events(events_path)
    counts = {kind: 0 for kind in ("trial_sampled", "result", "trial_done", "trial_failed")}
    stopped = completed = 0
    best_line = "best: (campaign incomplete)"
    for event in events:
        if event.kind in counts:
            counts[event.kind] += 1
        if event.kind == "trial_done":
            if event.payload.get("status") == "completed":
                completed += 1
            else:
                stopped += 1
        if event.kind == "campaign_done":
            if event.payload.get("best_trial_id") is None:
                best_line = "best: none (no trial reached a rung)"
            else:
                best_line = (
                    f"best: trial {event.payload['best_trial_id']} "
                    f"metric {event.payload['best_metric']:.4f} "
                    f"at {event.payload['best_resource']} epochs, "
                    f"config {event.payload['best_config']}"
                )
    lines = [
        f"trials sampled: {counts['trial_sampled']}",
        f"results reported: {counts['result']}",
        f"trials stopped early: {stopped}",
        f"trials run to the horizon: {completed}",
        f"trials failed: {counts['trial_failed']}",
        best_line,
    ]
    return "\n".join(lines)
