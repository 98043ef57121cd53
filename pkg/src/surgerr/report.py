"""Deterministic JSON/CSV writers and the plot-data file set."""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections.abc import Iterable, Sequence
from pathlib import Path


def format_float(x: float) -> str:
    """17 significant digits, always recognisable as a float; non-finite -> ''."""
    if not math.isfinite(x):
        return ""
    s = f"{x:.17g}"
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _json_value(value, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if value is None or value is True or value is False:
        return json.dumps(value)
    if isinstance(value, float):
        return format_float(value) if math.isfinite(value) else "null"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_json_value(v, indent, level + 1)}"
                 for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [pad + _json_value(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(value, "item"):  # numpy scalar
        return _json_value(value.item(), indent, level)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps(payload, indent: int = 2) -> str:
    return _json_value(payload, indent, 0) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return format_float(v)
    if hasattr(v, "item"):
        return _cell(v.item())
    s = "" if v is None else str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", text).strip("_")


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class OutputWriter:
    """Collects files under one directory and records them for ``index.json``."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.files: list[str] = []
        self.notes: list[str] = []

    def write_text(self, rel: str, text: str) -> Path:
        path = self.root / rel
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
        if rel not in self.files:
            self.files.append(rel)
        return path

    def write_json(self, rel: str, payload) -> Path:
        return self.write_text(rel, dumps(payload))

    def write_csv(self, rel: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        return self.write_text(rel, csv_text(header, rows))

    def write_index(self) -> Path:
        entries = [{"path": rel, "sha256": sha256_file(self.root / rel)} for rel in sorted(self.files)]
        return self.write_json("index.json", {"files": entries, "notes": list(self.notes)})


def emit_plot_data(report, writer: OutputWriter) -> None:
    """Write the figure-data CSVs for a finished AnalysisReport."""
    for ds in report.distance_sets:
        writer.write_csv(
            f"plots/dtw_{slug(ds.task)}_{ds.gesture}_{slug(ds.group.name)}.csv",
            ["task", "gesture", "group", "kind", "distance"],
            ds.rows(),
        )
    if report.trajectories:
        by_key: dict = {}
        for tr in report.trajectories:
            by_key.setdefault((tr.task, tr.gesture, tr.variable_column), []).append(tr)
        for (task, gesture, col), trs in by_key.items():
            rows = [row for tr in trs for row in tr.rows()]
            writer.write_csv(
                f"plots/trajectory_{slug(task)}_{gesture}_c{col}.csv",
                ["task", "gesture", "column", "class", "time", "value"],
                rows,
            )
    elif report.stages_run and "trajavg" in report.stages_run:
        writer.notes.append("no average trajectories were computed; no trajectory files written")
    if report.instance_durations:
        writer.write_csv(
            "plots/gesture_durations.csv",
            ["task", "trial_id", "gesture_index", "gesture", "class", "duration_frames"],
            report.instance_durations,
        )
    if report.trial_rows:
        writer.write_csv(
            "plots/trial_scatter.csv",
            ["trial_id", "duration_frames", "executional_errors", "procedural_errors"],
            report.trial_rows,
        )
