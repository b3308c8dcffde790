"""
Reconstruction reports (JSON) and the evaluation tables built from them.
"""

from __future__ import annotations

import csv
import glob
import io
import json
import logging
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Optional, Sequence

from pydantic import BaseModel, ValidationError

from app.core import binary_format as bf
from app.core.errors import NbvIOError, ParseError
from app.schemas.report import (
    CoverageRow,
    IterationReport,
    ReconstructionReport,
    RunReport,
    TimingRow,
    ViewRecord,
)
from app.services.reconstruction_service import ReconstructionRun

logger = logging.getLogger(__name__)


def run_report(run: ReconstructionRun, object_name: str, max_scans: int, planner: Optional[str] = None) -> RunReport:
    iterations = [
        IterationReport(
            index=r.index,
            view=ViewRecord(**r.view.to_dict()),
            points_added=r.points_added,
            coverage=r.coverage,
            planning_time=r.planning_time,
        )
        for r in run.iterations
    ]
    return RunReport(
        tag=run.planner,
        planner=planner or run.planner,
        object=object_name,
        complete=run.complete,
        error=run.error,
        max_scans=max_scans,
        final_coverage=run.final_coverage,
        total_points=len(run.cloud),
        iterations=iterations,
    )


def write_report(report: ReconstructionReport, path: str | Path) -> None:
    text = json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
    bf.atomic_write_bytes(path, text.encode("utf-8"))
    logger.info("Wrote report %s (%d runs)", path, len(report.runs))


def read_report(path: str | Path) -> ReconstructionReport:
    raw = bf.read_file_bytes(path)
    try:
        return ReconstructionReport.model_validate_json(raw)
    except ValidationError as exc:
        raise ParseError(f"{path} is not a reconstruction report: {exc.errors()[0].get('msg')}", path=str(path)) from exc


def collect_reports(patterns: Sequence[str], base_dir: str | Path = ".") -> list[Path]:
    """Expand glob patterns (relative ones against base_dir); no match is an input error."""
    found: list[Path] = []
    for pattern in patterns:
        full = pattern if Path(pattern).is_absolute() else str(Path(base_dir) / pattern)
        found.extend(Path(p) for p in sorted(glob.glob(full)))
    unique = sorted(set(found))
    if not unique:
        raise NbvIOError(f"No report matches {list(patterns)} under {base_dir}", patterns=list(patterns))
    return unique


# ---------------------------------------------------------------------- tables
def coverage_table(reports: Iterable[ReconstructionReport]) -> list[CoverageRow]:
    return [
        CoverageRow(
            object=run.object,
            planner=run.tag,
            scans=len(run.iterations),
            final_coverage=run.final_coverage,
            complete=run.complete,
        )
        for report in reports
        for run in report.runs
    ]


def timing_table(reports: Iterable[ReconstructionReport]) -> list[TimingRow]:
    """Mean per-call planning time per planner tag, pooled over every report."""
    calls: dict[str, list[float]] = defaultdict(list)
    for report in reports:
        for run in report.runs:
            calls[run.tag].extend(run.planning_times)
    rows = []
    for tag in sorted(calls):
        times = calls[tag]
        rows.append(
            TimingRow(
                planner=tag,
                calls=len(times),
                mean_planning_time=sum(times) / len(times) if times else None,
            )
        )
    return rows


def coverage_curves(reports: Iterable[ReconstructionReport]) -> list[dict]:
    return [
        {"object": run.object, "planner": run.tag, "scan": it.index + 1, "coverage": it.coverage}
        for report in reports
        for run in report.runs
        for it in run.iterations
    ]


def _rows(rows: Sequence[BaseModel | dict]) -> list[dict]:
    return [r.model_dump() if isinstance(r, BaseModel) else dict(r) for r in rows]


def write_table_csv(rows: Sequence[BaseModel | dict], path: str | Path) -> None:
    data = _rows(rows)
    buffer = io.StringIO()
    if data:
        writer = csv.DictWriter(buffer, fieldnames=list(data[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(data)
    bf.atomic_write_bytes(path, buffer.getvalue().encode("utf-8"))


def format_table(rows: Sequence[BaseModel | dict]) -> str:
    """Fixed-width text rendering for stdout."""
    data = _rows(rows)
    if not data:
        return "(empty)"
    columns = list(data[0])

    def cell(value) -> str:
        if value is None:
            return "-"
        if isinstance(value, float):
            return f"{value:.4f}"
        return str(value)

    widths = {c: max(len(c), *(len(cell(r[c])) for r in data)) for c in columns}
    lines = ["  ".join(c.ljust(widths[c]) for c in columns)]
    lines.append("  ".join("-" * widths[c] for c in columns))
    for r in data:
        lines.append("  ".join(cell(r[c]).ljust(widths[c]) for c in columns))
    return "\n".join(lines)
