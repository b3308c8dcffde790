"""
The reconstruction loop: position, sense, update, plan.

Registration is the identity (the simulated sensor is placed exactly), so
each scan is fused straight into the grid and appended to the accumulated
object cloud. Coverage is the share of reference points with an accumulated
point within the matching distance.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from app.core.errors import DegenerateMesh, EmptyReference, InvalidGeometry, InvalidScale, NbvError
from app.models.camera import RangeCamera
from app.models.mesh import Scene, TriangleMesh
from app.models.occupancy_grid import NETWORK_GRID_DIMS, OccupancyGrid
from app.models.point_cloud import PointCloud
from app.models.view import View
from app.services.planner_service import NbvPlanner
from app.services.sensor_service import SensorService, object_points

logger = logging.getLogger(__name__)

# object size the configured matching distance refers to
REFERENCE_OBJECT_SIZE = 0.2

_NEIGHBOUR_OFFSETS = np.array(
    [(dx, dy, dz) for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)],
    dtype=np.int64,
)


@dataclass
class IterationRecord:
    index: int
    view: View
    points_added: int
    coverage: float
    # None for the final scan, which is not followed by a planning call
    planning_time: Optional[float] = None


@dataclass
class ReconstructionRun:
    planner: str
    grid: OccupancyGrid
    cloud: PointCloud
    iterations: list[IterationRecord] = field(default_factory=list)
    complete: bool = True
    failure: Optional[NbvError] = None

    @property
    def final_coverage(self) -> float:
        return self.iterations[-1].coverage if self.iterations else 0.0

    @property
    def planning_times(self) -> list[float]:
        return [r.planning_time for r in self.iterations if r.planning_time is not None]

    @property
    def error(self) -> Optional[str]:
        return self.failure.code if self.failure is not None else None


# ---------------------------------------------------------------------- coverage
def matching_distance(distance: float, object_size: float) -> float:
    """Scale a matching distance given for REFERENCE_OBJECT_SIZE to another object size."""
    return distance * object_size / REFERENCE_OBJECT_SIZE


def _cell_keys(cells: np.ndarray, low: np.ndarray, extent: np.ndarray) -> np.ndarray:
    shifted = cells - low
    return (shifted[:, 0] * extent[1] + shifted[:, 1]) * extent[2] + shifted[:, 2]


def coverage(accumulated: PointCloud, reference: PointCloud, d: float) -> float:
    """
    Percentage of reference points with an accumulated point within distance d.

    Accumulated points are bucketed in a uniform hash of cell size d, so every
    query only inspects the 27 cells around its own.
    """
    if reference.is_empty:
        raise EmptyReference("Reference cloud is empty")
    if not d > 0:
        raise InvalidScale(f"Matching distance must be positive, got {d}")
    if accumulated.is_empty:
        return 0.0

    acc, ref = accumulated.points, reference.points
    acc_cells = np.floor(acc / d).astype(np.int64)
    ref_cells = np.floor(ref / d).astype(np.int64)
    # one cell of margin on each side for the neighbour offsets
    low = np.minimum(acc_cells.min(axis=0), ref_cells.min(axis=0)) - 1
    extent = np.maximum(acc_cells.max(axis=0), ref_cells.max(axis=0)) + 2 - low
    if float(np.prod(extent.astype(np.float64))) >= 2.0**62:
        raise InvalidGeometry(f"Clouds span too many cells of size {d} for the coverage hash")

    acc_keys = _cell_keys(acc_cells, low, extent)
    order = np.argsort(acc_keys, kind="stable")
    sorted_keys = acc_keys[order]
    d2 = d * d
    covered = np.zeros(len(ref), dtype=bool)

    for offset in _NEIGHBOUR_OFFSETS:
        pending = np.flatnonzero(~covered)
        if pending.size == 0:
            break
        keys = _cell_keys(ref_cells[pending] + offset, low, extent)
        start = np.searchsorted(sorted_keys, keys, side="left")
        counts = np.searchsorted(sorted_keys, keys, side="right") - start
        total = int(counts.sum())
        if total == 0:
            continue
        query = np.repeat(pending, counts)
        first = np.repeat(start, counts)
        within = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        candidates = order[first + within]
        diff = ref[query] - acc[candidates]
        close = np.einsum("ij,ij->i", diff, diff) <= d2
        covered[query[close]] = True

    return 100.0 * np.count_nonzero(covered) / len(ref)


def reference_cloud_from_mesh(mesh: TriangleMesh, n_points: int, seed: int) -> PointCloud:
    """Area-weighted uniform samples on the mesh surface."""
    if n_points < 1:
        raise InvalidGeometry(f"Reference cloud needs at least one point, got {n_points}")
    if len(mesh.faces) == 0:
        raise DegenerateMesh(f"Mesh {mesh.name!r} has no faces")
    areas = mesh.areas()
    total = float(areas.sum())
    if not total > 0:
        raise DegenerateMesh(f"Mesh {mesh.name!r} has zero surface area")

    rng = np.random.default_rng(seed)
    faces = rng.choice(len(areas), size=n_points, p=areas / total)
    r1, r2 = rng.random((2, n_points))
    s = np.sqrt(r1)
    tri = mesh.triangles[faces]
    points = (
        (1.0 - s)[:, None] * tri[:, 0]
        + (s * (1.0 - r2))[:, None] * tri[:, 1]
        + (s * r2)[:, None] * tri[:, 2]
    )
    return PointCloud(points=points)


# ---------------------------------------------------------------------- loop
def run(
    scene: Scene,
    reference: PointCloud,
    planner: NbvPlanner,
    camera: RangeCamera,
    initial_view: View,
    max_scans: int,
    *,
    grid_center: Sequence[float] = (0.0, 0.0, 0.0),
    grid_span: float = 0.4,
    grid_dims: tuple[int, int, int] = NETWORK_GRID_DIMS,
    coverage_distance: float = 0.005,
    noise_std: float = 0.0,
    seed: int = 0,
    tag: Optional[str] = None,
    workers: Optional[int] = None,
) -> ReconstructionRun:
    """
    Scan, fuse, measure coverage and ask the planner for the next view until
    max_scans scans are taken. A planner error after the first scan ends the
    run early with complete=False and the error kept on the run.
    """
    if max_scans < 1:
        raise InvalidGeometry(f"max_scans must be at least 1, got {max_scans}")
    if reference.is_empty:
        raise EmptyReference("Reference cloud is empty")

    grid = OccupancyGrid.new(grid_center, grid_span, grid_dims)
    sensor = SensorService(scene, camera, noise_std=noise_std, seed=seed, workers=workers)
    clearance = grid.voxel_size
    result = ReconstructionRun(planner=tag or planner.name, grid=grid, cloud=PointCloud())
    view = initial_view

    for index in range(max_scans):
        scan = sensor.scan(view)
        grid.integrate_scan(scan, camera.max_range)
        added = object_points(scene, scan, clearance)
        result.cloud = result.cloud.extended(added)
        covered = coverage(result.cloud, reference, coverage_distance)
        record = IterationRecord(index=index, view=view, points_added=len(added), coverage=covered)
        result.iterations.append(record)
        logger.info(
            "[%s] scan %d/%d: +%d points, coverage %.2f%%",
            result.planner,
            index + 1,
            max_scans,
            len(added),
            covered,
        )
        if index == max_scans - 1:
            break

        started = time.perf_counter()
        try:
            view = planner.plan(grid)
        except NbvError as exc:
            record.planning_time = time.perf_counter() - started
            result.complete = False
            result.failure = exc
            logger.warning("[%s] planner failed after scan %d: %s", result.planner, index + 1, exc)
            break
        record.planning_time = time.perf_counter() - started

    return result
