"""
`eval`: coverage and planning-time tables over reconstruction reports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from app.schemas.report import CoverageRow, TimingRow
from app.schemas.run_config import RunConfig
from app.services import report_service

logger = logging.getLogger(__name__)


@dataclass
class EvalResult:
    coverage: list[CoverageRow]
    timing: list[TimingRow]
    files: list[Path]

    def as_text(self) -> str:
        return "\n".join(
            [
                "Coverage (%)",
                report_service.format_table(self.coverage),
                "",
                "Planning time (s)",
                report_service.format_table(self.timing),
            ]
        )


def run(config: RunConfig) -> EvalResult:
    paths = report_service.collect_reports(config.eval.reports, config.output_dir)
    reports = [report_service.read_report(p) for p in paths]
    logger.info("Evaluating %d report(s)", len(reports))

    coverage = report_service.coverage_table(reports)
    timing = report_service.timing_table(reports)
    files = [
        config.output_path("coverage_table.csv"),
        config.output_path("timing_table.csv"),
        config.output_path("coverage_curves.csv"),
    ]
    report_service.write_table_csv(coverage, files[0])
    report_service.write_table_csv(timing, files[1])
    report_service.write_table_csv(report_service.coverage_curves(reports), files[2])
    return EvalResult(coverage=coverage, timing=timing, files=files)
