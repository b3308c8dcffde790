"""
`reconstruct`: run the reconstruction loop per object with one planner, or
with every planner under `--compare`; writes a JSON report per object plus
grid and cloud exports per run.
"""

from __future__ import annotations

import logging
from pathlib import Path

from app.commands.common import build_scenes, candidate_sphere, first_view, make_planner
from app.core.errors import NbvError
from app.core.seeding import component_seed
from app.schemas.report import ReconstructionReport
from app.schemas.run_config import RunConfig, dump_config
from app.services import reconstruction_service, report_service

logger = logging.getLogger(__name__)

COMPARE_PLANNERS = ("infogain", "classification", "regression")


def _planner_jobs(config: RunConfig) -> list[tuple[str, str, str | None]]:
    """(tag, planner name, weights override) for every run of one object."""
    if not config.reconstruction.compare:
        return [(config.planner.name, config.planner.name, None)]
    jobs = [(name, name, None) for name in COMPARE_PLANNERS]
    for weights in config.network.compare_weights:
        jobs.append((f"regression:{Path(weights).stem}", "regression", weights))
    return jobs


def run(config: RunConfig) -> list[Path]:
    camera = config.camera.build()
    sphere = candidate_sphere(config)
    start = first_view(config, sphere)
    distance = reconstruction_service.matching_distance(
        config.reconstruction.coverage_distance, config.scene.object_size
    )
    written: list[Path] = []
    failure: NbvError | None = None

    for item in build_scenes(config):
        reference = reconstruction_service.reference_cloud_from_mesh(
            item.mesh, config.reconstruction.reference_points, component_seed(config.seed, f"reference:{item.object_id}")
        )
        report = ReconstructionReport(seed=config.seed, object=item.name, config=dump_config(config))
        for tag, name, weights in _planner_jobs(config):
            planner = make_planner(name, config, camera, sphere, item.mesh, weights=weights)
            result = reconstruction_service.run(
                item.scene,
                reference,
                planner,
                camera,
                start,
                config.reconstruction.max_scans,
                grid_center=config.sphere.center,
                grid_span=config.grid.span,
                grid_dims=config.grid_dims(),
                coverage_distance=distance,
                noise_std=config.camera.noise_std,
                seed=component_seed(config.seed, f"sensor:{item.object_id}"),
                tag=tag,
            )
            report.runs.append(
                report_service.run_report(result, item.name, config.reconstruction.max_scans, planner=name)
            )
            stem = f"{item.name}_{tag.replace(':', '-')}"
            result.grid.write_text(config.output_path(f"grid_{stem}.txt"))
            result.cloud.write_xyz(config.output_path(f"cloud_{stem}.xyz"))
            if result.failure is not None and failure is None:
                failure = result.failure

        path = config.output_path(f"report_{item.name}.json")
        report_service.write_report(report, path)
        written.append(path)

    if failure is not None:
        # reports for truncated runs are on disk; the run still fails
        raise failure
    return written
