"""Command-line entry point.

    multinav run    [--config PATH] [--seed N] [--episodes N] [--out DIR]
                    [--snapshots] [--parallel N]
    multinav replay --log PATH
    multinav eval   --logs DIR

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .harness import (ConfigError, EpisodeLog, RunConfig, load_config,
                      recompute_result_from_log, replay, run_suite,
                      spec_from_log)
from .metrics import aggregate, format_table


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multinav",
        description="Multi-object goal navigation benchmark harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="generate and run an episode suite")
    run.add_argument("--config", type=Path, help="JSON run config file")
    run.add_argument("--seed", type=int, help="suite base seed")
    run.add_argument("--episodes", type=int, help="number of episodes")
    run.add_argument("--out", type=Path, help="output directory for logs")
    run.add_argument("--snapshots", action="store_true",
                     help="write occupancy/goal map snapshots")
    run.add_argument("--parallel", type=int,
                     help="episode worker processes")

    rep = sub.add_parser("replay", help="verify a log against the simulator")
    rep.add_argument("--log", type=Path, required=True, help="episode log file")

    ev = sub.add_parser("eval", help="recompute the metric table from logs")
    ev.add_argument("--logs", type=Path, required=True,
                    help="directory containing ep_*.jsonl logs")
    return parser


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        overrides = {
            "seed": args.seed,
            "episodes": args.episodes,
            "out": str(args.out) if args.out else None,
            "parallel": args.parallel,
        }
        for name, value in overrides.items():
            if value is not None:
                cfg = dataclasses.replace(cfg, **{name: value})
        if args.snapshots:
            cfg = dataclasses.replace(cfg, snapshots=True)
        if cfg.episodes < 1 or cfg.parallel < 1:
            raise ConfigError("episodes and parallel must be positive")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        summary, _ = run_suite(cfg, echo=print)
    except Exception as exc:  # noqa: BLE001 - surface as a runtime failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    print(format_table([("SGoLAM-style (ours)", summary)]))
    return 0


def _cmd_replay(args) -> int:
    try:
        log = EpisodeLog.from_jsonl(args.log.read_text())
        spec, cfg = spec_from_log(log)
    except (OSError, ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        report = replay(log, spec, cfg)
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    if report.ok:
        print(f"replay clean: {report.steps_checked} steps verified")
        return 0
    print(f"replay diverged: {report.first_divergence}")
    return 2


def _cmd_eval(args) -> int:
    paths = sorted(args.logs.glob("ep_*.jsonl")) if args.logs.is_dir() else []
    if not paths:
        print(f"config error: no ep_*.jsonl logs under {args.logs}",
              file=sys.stderr)
        return 1
    try:
        results = []
        for path in paths:
            log = EpisodeLog.from_jsonl(path.read_text())
            results.append(recompute_result_from_log(log))
        summary = aggregate(results)
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    print(format_table([("SGoLAM-style (ours)", summary)]))
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "replay":
        return _cmd_replay(args)
    return _cmd_eval(args)


if __name__ == "__main__":
    raise SystemExit(main())
