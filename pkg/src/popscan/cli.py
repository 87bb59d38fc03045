"""Command-line entry points: ``explore``, ``replay`` and ``report``.

Exit codes: 0 success, 1 configuration or input error, 2 partial run
(device lost), 3 replay divergence.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import statistics
import sys
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from . import artifacts
from .adb import AdbClient, AdbDriver, server_endpoint_from_env
from .classifier import ClassifierRules, label_records
from .detector import DetectorConfig
from .explorer import Explorer, ExplorerConfig, random_walk, read_events, replay_events
from .report import build_report
from .simulator import AppScript, ScriptError, SimulatedDevice

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_DIVERGED = 3

log = logging.getLogger("popscan")


class ConfigError(Exception):
    pass


def demo_script_path() -> Path:
    return Path(str(resources.files("popscan").joinpath("data/demo_app.json")))


def load_script(target: str) -> AppScript:
    path = demo_script_path() if target == "demo" else Path(target)
    try:
        return AppScript.load(path)
    except (OSError, json.JSONDecodeError, ScriptError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot load app script {target!r}: {exc}") from exc


def _load_rules(path: Optional[str]) -> ClassifierRules:
    if not path:
        return ClassifierRules.default()
    try:
        return ClassifierRules.load(path)
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot load rule pack {path!r}: {exc}") from exc


def _prepare_out(out: str) -> Path:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out!r}: {exc}") from exc
    if not os.access(path, os.W_OK):
        raise ConfigError(f"output directory {out!r} is not writable")
    return path


def _device_for(mode: str, target: str, settle_ms: int):
    if mode == "simulate":
        return SimulatedDevice(load_script(target), settle_ms=settle_ms)
    serial, sep, package = target.partition("/")
    if not sep or not serial or not package:
        raise ConfigError("device target must look like SERIAL/PACKAGE")
    host, port = server_endpoint_from_env()
    return AdbDriver(AdbClient(host, port), serial, package, settle_ms=settle_ms)


def report_run(run: Path) -> dict:
    summary = build_report(artifacts.load_records(run), artifacts.load_stats(run))
    data = summary.to_dict()
    artifacts.write_summary(run, data)
    sys.stdout.write(summary.to_text())
    return data


# --------------------------------------------------------------------------
# commands

def cmd_explore(args: argparse.Namespace) -> int:
    if args.budget < 0:
        raise ConfigError("--budget must be non-negative")
    if args.baseline_seeds and args.mode != "simulate":
        raise ConfigError("the random-walk baseline needs simulate mode (fresh app per seed)")
    out = _prepare_out(args.out)
    rules = _load_rules(args.rules)
    try:
        config = ExplorerConfig(action_budget=args.budget, seed=args.seed, settle_ms=args.settle_ms,
                                time_budget=args.time_budget)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    detector = DetectorConfig()
    device = _device_for(args.mode, args.target, config.settle_ms)

    explorer = Explorer(device, config, detector)
    result = explorer.explore()
    label_records(result.records, rules=rules)
    run_config = {
        "schema_version": 1,
        "mode": args.mode,
        "target": args.target,
        "explorer": config.to_dict(),
        "detector": detector.to_dict(),
        "rules": args.rules,
        "baseline_seeds": list(args.baseline_seeds or []),
    }
    artifacts.write_run(out, result, run_config)

    if args.baseline_seeds:
        counts = {}
        for seed in args.baseline_seeds:
            walk = random_walk(_device_for("simulate", args.target, config.settle_ms), seed, args.budget, config, detector)
            counts[str(seed)] = len(walk.records)
        baseline = {
            "explore_pows": len(result.records),
            "random_walk_pows": counts,
            "random_walk_median": statistics.median(counts.values()),
        }
        (out / "baseline.json").write_text(json.dumps(baseline, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    report_run(out)
    if result.stats.aborted:
        log.error("device lost; partial results written to %s", out)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    log_path = Path(args.log)
    try:
        lines = log_path.read_text(encoding="utf-8").splitlines()
        events = read_events(lines)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read event log {args.log!r}: {exc}") from exc
    script = load_script(args.script)
    config_path = log_path.parent / "config.json"
    config, detector = ExplorerConfig(), DetectorConfig()
    if config_path.exists():
        saved = json.loads(config_path.read_text(encoding="utf-8"))
        config = ExplorerConfig.from_dict(saved.get("explorer", {}))
        detector = DetectorConfig.from_dict(saved.get("detector", {}))
    diverged = replay_events(events, SimulatedDevice(script, settle_ms=config.settle_ms), config, detector)
    if diverged is not None:
        print(f"replay diverged at seq {diverged}", file=sys.stderr)
        return EXIT_DIVERGED
    print(f"replayed {len(events)} events, state sequence identical")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    try:
        report_run(Path(args.run))
    except artifacts.MissingArtifact as exc:
        raise ConfigError(str(exc)) from exc
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"incomplete run artifacts in {args.run!r}: {exc}") from exc
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="popscan", description="Explore Android apps and label their pop-ups.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("explore", help="explore an app and write a run directory")
    e.add_argument("--mode", choices=["simulate", "device"], required=True)
    e.add_argument("--target", required=True,
                   help="app script path (or 'demo') in simulate mode, SERIAL/PACKAGE in device mode")
    e.add_argument("--budget", type=int, default=500, help="action budget")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True, help="run directory")
    e.add_argument("--rules", default=None, help="classifier rule pack (JSON)")
    e.add_argument("--baseline-seeds", type=int, nargs="*", default=None,
                   help="also run the random-walk baseline with these seeds")
    e.add_argument("--settle-ms", type=int, default=800)
    e.add_argument("--time-budget", type=float, default=None, help="wall-clock budget in seconds")
    e.set_defaults(func=cmd_explore)

    r = sub.add_parser("replay", help="re-run an event log against a script and compare states")
    r.add_argument("--log", required=True)
    r.add_argument("--script", required=True)
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("report", help="print and write the summary of a run directory")
    s.add_argument("--run", required=True)
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
