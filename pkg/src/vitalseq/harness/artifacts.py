"""Artifact writers. Every JSON file is byte-stable: sorted keys, fixed
indentation, trailing newline, and no timestamps, so identical runs produce
identical bytes."""

from __future__ import annotations

import json
from pathlib import Path

from ..metrics import METRIC_NAMES, MetricsReport


def stable_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(stable_json(obj))
    return path


def write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def write_manifest(out_dir, command: str, seed: int, files: list[str],
                   fingerprint: str | None = None, extra: dict | None = None) -> Path:
    body = {"command": command, "seed": seed, "files": sorted(files)}
    if fingerprint is not None:
        body["fingerprint"] = fingerprint
    if extra:
        body.update(extra)
    return write_json(Path(out_dir) / "manifest.json", body)


def ablation_table(rows: list[tuple[str, MetricsReport]]) -> str:
    """Multi-arm results table: one row per method, mean ± std per metric."""
    label_w = max(len("method"), max(len(label) for label, _ in rows))
    cells = {label: [getattr(rep, name).formatted() for name in METRIC_NAMES]
             for label, rep in rows}
    col_w = [max(len(name), max(len(cells[label][j]) for label, _ in rows))
             for j, name in enumerate(METRIC_NAMES)]
    header = "method".ljust(label_w) + "".join(
        f"  {name.ljust(col_w[j])}" for j, name in enumerate(METRIC_NAMES))
    sep = "-" * len(header)
    lines = [header, sep]
    for label, _ in rows:
        lines.append(label.ljust(label_w) + "".join(
            f"  {cells[label][j].ljust(col_w[j])}" for j in range(len(METRIC_NAMES))))
    return "\n".join(lines) + "\n"
