"""Command-line entry points.

``tune`` runs a campaign, ``final`` retrains the winner into an
ensemble, ``ablation`` measures each pipeline ingredient, ``report``
summarizes an event log, and ``replay`` re-derives every scheduling
decision from a log to verify it.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from .ensemble import ensemble_size_curve, write_curve_csv, write_predictions_jsonl
from .errors import TunekitError
from .events import read_events, replay_scheduler
from .orchestrator import (
    CampaignConfig,
    final_train,
    report,
    run_ablation,
    run_campaign,
)
from .space import TrialConfig

log = logging.getLogger("tunekit")


def _load_best(path: str) -> TrialConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return TrialConfig.from_dict(yaml.safe_load(fh))


def _cmd_tune(args: argparse.Namespace) -> int:
    config = CampaignConfig.from_file(args.config)
    out_dir = Path(args.out)
    result = run_campaign(config, out_dir)
    print(report(result.events_path))
    if result.best_config is None:
        log.error("no trial reached the first rung")
        return 1
    best_path = out_dir / "best_config.yaml"
    with open(best_path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(result.best_config.to_dict(), fh, sort_keys=False)
    print(f"best config written to {best_path}")
    return 0


def _cmd_final(args: argparse.Namespace) -> int:
    config = CampaignConfig.from_file(args.config)
    best = _load_best(args.best)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    result = final_train(config, best, use_tta=args.tta)

    metrics = [run.final_metric for run in result.runs]
    print(f"final runs: {len(result.runs)} at {result.epochs} epochs")
    print(f"single-model metric: mean {sum(metrics) / len(metrics):.4f} "
          f"min {min(metrics):.4f} max {max(metrics):.4f}")
    with open(out_dir / "final_runs.csv", "w", encoding="utf-8") as fh:
        fh.write("run_id,seed,final_metric,epochs\n")
        for run in result.runs:
            fh.write(f"{run.run_id},{run.seed},{run.final_metric:.6f},{run.epochs}\n")

    if result.predictions:
        write_predictions_jsonl(out_dir / "predictions.jsonl", result.predictions)
        print(f"ensemble metric over {len(result.predictions)} members: {result.ensemble_metric:.4f}")
        from .orchestrator import _eval_labels  # labels of the executor's eval split

        executor_labels = None
        try:
            from .executor import make_executor

            executor = make_executor(config.executor, config.seed, combined=config.combined_final)
            executor_labels = _eval_labels(executor)
        except Exception:
            pass
        if executor_labels is not None and len(result.predictions) > 1:
            sizes = range(1, len(result.predictions) + 1)
            curve = ensemble_size_curve(
                result.predictions, executor_labels, sizes, repeats=20, rng=config.seed
            )
            write_curve_csv(out_dir / "ensemble_curve.csv", curve)
            print(f"size curve written to {out_dir / 'ensemble_curve.csv'}")
    return 0


def _cmd_ablation(args: argparse.Namespace) -> int:
    config = CampaignConfig.from_file(args.config)
    best = _load_best(args.best)
    rows = run_ablation(config, best, ensemble_runs=args.ensemble_runs)
    width = max(len(row.name) for row in rows)
    print(f"{'step'.ljust(width)}  metric  runs")
    for row in rows:
        print(f"{row.name.ljust(width)}  {row.metric:.4f}  {row.runs}")
    if args.out:
        out_path = Path(args.out)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write("step,metric,runs\n")
            for row in rows:
                fh.write(f"{row.name},{row.metric:.6f},{row.runs}\n")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    print(report(args.events))
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    config = CampaignConfig.from_file(args.config)
    events = read_events(args.events)
    scheduler = replay_scheduler(events, config.asha)
    print(f"replayed {len(events)} events: every decision matches")
    best = scheduler.best_trial()
    if best is not None:
        print(f"best: trial {best.trial_id} metric {best.metric:.4f} at {best.resource} epochs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tunekit", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    tune = sub.add_parser("tune", help="run a tuning campaign")
    tune.add_argument("--config", required=True, help="campaign YAML")
    tune.add_argument("--out", required=True, help="output directory")
    tune.set_defaults(handler=_cmd_tune)

    final = sub.add_parser("final", help="retrain the winning config into an ensemble")
    final.add_argument("--config", required=True, help="campaign YAML")
    final.add_argument("--best", required=True, help="best config YAML (from tune)")
    final.add_argument("--out", required=True, help="output directory")
    final.add_argument("--tta", action="store_true", help="aggregate multi-view predictions")
    final.set_defaults(handler=_cmd_final)

    ablation = sub.add_parser("ablation", help="measure each pipeline ingredient")
    ablation.add_argument("--config", required=True, help="campaign YAML")
    ablation.add_argument("--best", required=True, help="best config YAML (from tune)")
    ablation.add_argument("--out", default=None, help="optional CSV path")
    ablation.add_argument("--ensemble-runs", type=int, default=5)
    ablation.set_defaults(handler=_cmd_ablation)

    rep = sub.add_parser("report", help="summarize an event log")
    rep.add_argument("--events", required=True, help="events.jsonl path")
    rep.set_defaults(handler=_cmd_report)

    replay = sub.add_parser("replay", help="verify an event log against the scheduler")
    replay.add_argument("--config", required=True, help="campaign YAML")
    replay.add_argument("--events", required=True, help="events.jsonl path")
    replay.set_defaults(handler=_cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except TunekitError as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
