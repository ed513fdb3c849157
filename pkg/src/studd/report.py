"""Byte-stable report serialisation (JSON and CSV)."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

from ._util import StuddError, ValidationError
from .harness import RunReport
from .metrics import RankTable

FIELDS = ("dataset", "method", "kappa", "label_ratio", "n_alarms", "alarm_times",
          "sliding_kappa", "labels_used", "stream_length", "seed")


def fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValidationError(f"cannot serialise non-finite value {x!r}")
    return f"{x:.6f}"


def _json(value) -> str:
    # floats get fixed 6-digit formatting; json.dumps would use repr
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return fmt_float(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json(v) for v in value) + "]"
    if hasattr(value, "tolist"):
        return _json(value.tolist())
    raise ValidationError(f"cannot serialise {type(value).__name__}")


def report_to_json(report: RunReport) -> str:
    return _json({f: getattr(report, f) for f in FIELDS})


def reports_to_json(reports: Sequence[RunReport]) -> str:
    if len(reports) == 1:
        return report_to_json(reports[0]) + "\n"
    return "[\n" + ",\n".join(report_to_json(r) for r in reports) + "\n]\n"


def reports_to_csv(reports: Sequence[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in reports:
        w.writerow([
            r.dataset, r.method, fmt_float(r.kappa), fmt_float(r.label_ratio), r.n_alarms,
            ";".join(str(t) for t in r.alarm_times),
            ";".join(f"{t}:{fmt_float(k)}" for t, k in r.sliding_kappa),
            r.labels_used, r.stream_length, r.seed,
        ])
    return buf.getvalue()


def emit_report(reports: RunReport | Sequence[RunReport], format: str, path) -> None:
    """Write reports as one JSON object (or array) or as CSV, one row per report."""
    if isinstance(reports, RunReport):
        reports = [reports]
    if not reports:
        raise ValidationError("no reports to write")
    if format == "json":
        text = reports_to_json(reports)
    elif format == "csv":
        text = reports_to_csv(reports)
    else:
        raise ValidationError(f"unknown report format {format!r}")
    try:
        Path(path).write_text(text, encoding="utf-8", newline="")
    except OSError as exc:
        raise StuddError(f"cannot write {path}: {exc}") from exc


def write_series_csv(reports: Sequence[RunReport], path) -> None:
    """Long-format sliding-kappa series and alarm marks, one row per point."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "method", "t", "kappa", "alarm"])
    for r in reports:
        alarms = set(r.alarm_times)
        for t, k in r.sliding_kappa:
            w.writerow([r.dataset, r.method, t, fmt_float(k), int(t in alarms)])
    Path(path).write_text(buf.getvalue(), encoding="utf-8", newline="")


def load_reports(path) -> list[RunReport]:
    """Reports from a JSON file (object or array) or every ``*.json`` in a directory."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"{path} not found")
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    out = []
    for f in files:
        try:
            data = json.loads(f.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{f}: invalid JSON ({exc})") from None
        items = data if isinstance(data, list) else [data]
        for d in items:
            if not isinstance(d, dict) or "method" not in d or "kappa" not in d:
                continue    # rank tables and other JSON living next to reports
            try:
                out.append(RunReport.from_dict(d))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"{f}: malformed report ({exc})") from None
    if not out:
        raise ValidationError(f"no reports found in {path}")
    return out


def rank_table_to_json(table: RankTable) -> str:
    return _json(table.to_dict()) + "\n"


def rank_table_to_csv(table: RankTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", *table.methods])
    for d, row in zip(table.datasets, table.ranks):
        w.writerow([d, *(fmt_float(float(v)) for v in row)])
    avg = table.average
    w.writerow(["avg_rank", *(fmt_float(avg[m]) for m in table.methods)])
    return buf.getvalue()


def write_rank_table(table: RankTable, path) -> None:
    text = rank_table_to_csv(table) if str(path).endswith(".csv") else rank_table_to_json(table)
    Path(path).write_text(text, encoding="utf-8", newline="")
