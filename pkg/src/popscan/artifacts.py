"""Run directory layout: writing and reading exploration artifacts.

::

    <run>/config.json       run configuration
    <run>/events.jsonl      one exploration event per line
    <run>/graph.json        transition graph and state registry
    <run>/stats.json        exploration counters
    <run>/pows/<id>.json    labelled pop-up record
    <run>/pows/<id>.png     screenshot at first detection
    <run>/pows/<id>.hierarchy.json
    <run>/summary.json      report (written by the report step)
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from .adb import encode_png
from .explorer import ExplorationResult
from .gui import node_to_dict

REQUIRED = ("config.json", "events.jsonl", "graph.json", "stats.json", "pows")


class MissingArtifact(FileNotFoundError):
    pass


def _dump(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def write_run(out: Union[str, Path], result: ExplorationResult, config: dict) -> Path:
    out = Path(out)
    pows = out / "pows"
    pows.mkdir(parents=True, exist_ok=True)
    _dump(out / "config.json", config)
    with open(out / "events.jsonl", "w", encoding="utf-8") as fh:
        for ev in result.events:
            fh.write(ev.to_json() + "\n")
    _dump(out / "graph.json", result.graph.to_json(result.registry))
    _dump(out / "stats.json", result.stats.to_dict())
    for rec in result.records:
        if rec.screenshot is not None:
            (pows / f"{rec.id}.png").write_bytes(encode_png(rec.screenshot))
            rec.screenshot_ref = f"pows/{rec.id}.png"
        if rec.hierarchy is not None:
            _dump(pows / f"{rec.id}.hierarchy.json", node_to_dict(rec.hierarchy))
        _dump(pows / f"{rec.id}.json", rec.to_dict())
    return out


def check_run(run: Union[str, Path]) -> Path:
    run = Path(run)
    missing = [name for name in REQUIRED if not (run / name).exists()]
    if missing:
        raise MissingArtifact(f"{run}: missing {', '.join(missing)}")
    return run


def load_records(run: Union[str, Path]) -> list[dict]:
    pows = check_run(run) / "pows"
    paths = sorted(p for p in pows.glob("*.json") if not p.name.endswith(".hierarchy.json"))
    return [json.loads(p.read_text(encoding="utf-8")) for p in paths]


def load_stats(run: Union[str, Path]) -> dict:
    return json.loads((check_run(run) / "stats.json").read_text(encoding="utf-8"))


def write_summary(run: Union[str, Path], summary: dict) -> None:
    _dump(Path(run) / "summary.json", summary)
