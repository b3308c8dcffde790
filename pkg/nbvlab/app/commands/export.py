"""
`export`: configured objects as `.obj` meshes, their reference clouds as
`x y z` text and the candidate view sphere as CSV.
"""

from __future__ import annotations

import csv
import io
import logging
from pathlib import Path

from app.commands.common import build_scenes, candidate_sphere
from app.core import binary_format as bf
from app.core.seeding import component_seed
from app.schemas.run_config import RunConfig
from app.services.planner_service import ViewSphere
from app.services.reconstruction_service import reference_cloud_from_mesh

logger = logging.getLogger(__name__)

SPHERE_COLUMNS = ["x", "y", "z", "yaw", "pitch", "roll"]


def write_sphere_csv(sphere: ViewSphere, path: str | Path) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SPHERE_COLUMNS)
    for view in sphere.views:
        writer.writerow([repr(float(v)) for v in view.as_row()])
    bf.atomic_write_bytes(path, buffer.getvalue().encode("utf-8"))


def run(config: RunConfig) -> list[Path]:
    written: list[Path] = []
    for item in build_scenes(config):
        mesh_path = config.output_path(f"{item.name}.obj")
        item.mesh.write_obj(mesh_path)
        reference = reference_cloud_from_mesh(
            item.mesh, config.reconstruction.reference_points, component_seed(config.seed, f"reference:{item.object_id}")
        )
        cloud_path = config.output_path(f"{item.name}_reference.xyz")
        reference.write_xyz(cloud_path)
        written.extend([mesh_path, cloud_path])

    sphere_path = config.output_path("view_sphere.csv")
    write_sphere_csv(candidate_sphere(config), sphere_path)
    written.append(sphere_path)
    logger.info("Exported %d files to %s", len(written), config.output_dir)
    return written
