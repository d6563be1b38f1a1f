"""Report serialization: JSON document, flat CSV, and PNG figures."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

from .experiments import ExperimentReport


def _clean(obj: Any) -> Any:
    """Replace non-finite floats by None so the JSON stays standard."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def report_json(report: ExperimentReport) -> str:
    return json.dumps(_clean(report.to_json()), indent=1, allow_nan=False) + "\n"


def _flatten(prefix: str, obj: Any, out: dict[str, Any]) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    elif isinstance(obj, list) and all(isinstance(v, (int, float)) for v in obj):
        out[prefix] = ";".join(repr(float(v)) for v in obj)
    else:
        out[prefix] = obj


def report_csv(report: ExperimentReport) -> str:
    """One row per record; nested fields become dotted column names."""
    rows = []
    for rec in report.records:
        flat: dict[str, Any] = {}
        _flatten("", _clean(rec), flat)
        rows.append(flat)
    columns: list[str] = []
    for row in rows:
        columns.extend(c for c in row if c not in columns)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: "" if row.get(c) is None else row[c] for c in columns})
    return buf.getvalue()


def write_report(report: ExperimentReport, out_dir: str | Path, figures: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / "report.json", out / "report.csv"]
    paths[0].write_text(report_json(report), encoding="utf-8")
    paths[1].write_text(report_csv(report), encoding="utf-8")
    if figures:
        from .plotting import render

        paths.extend(render(report, out))
    return paths
