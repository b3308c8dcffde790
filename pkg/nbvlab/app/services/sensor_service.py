"""
Simulated range sensing: per-pixel ray casting against the scene triangles.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from app.core.config import settings
from app.core.ray_triangle import nearest_hits, rays_hitting_box
from app.models.camera import RangeCamera
from app.models.mesh import Scene, TriangleMesh
from app.models.point_cloud import PointCloud
from app.models.view import View

logger = logging.getLogger(__name__)

RAY_CHUNK = 1024


def _cast_chunk(
    origin: np.ndarray, directions: np.ndarray, meshes: list[TriangleMesh], min_range: float = 0.0
) -> np.ndarray:
    """Nearest hit distance beyond min_range over all meshes (inf = no hit)."""
    best = np.full(directions.shape[0], np.inf)
    for mesh in meshes:
        lo, hi = mesh.bounds
        candidates = np.flatnonzero(rays_hitting_box(origin[None, :], directions, lo, hi))
        if candidates.size == 0:
            continue
        t, _ = nearest_hits(origin[None, :], directions[candidates], mesh.triangles, t_min=min_range)
        best[candidates] = np.minimum(best[candidates], t)
    return best


def render_scan(
    scene: Scene,
    view: View,
    camera: RangeCamera,
    *,
    noise_std: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    workers: Optional[int] = None,
) -> PointCloud:
    """
    Range image of `scene` from `view`, returned as world-frame points.

    Each pixel sees the nearest surface at least min_range away; surfaces
    nearer than that are passed through. The hit is kept when it also lies
    within max_range. Chunks are merged in pixel order, so the result does not
    depend on the worker count.
    """
    origin, directions = camera.world_rays(view)
    meshes = scene.all_meshes()
    chunks = [directions[i : i + RAY_CHUNK] for i in range(0, len(directions), RAY_CHUNK)]
    workers = settings.NBV_WORKERS if workers is None else max(1, workers)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            ranges = list(pool.map(lambda d: _cast_chunk(origin, d, meshes, camera.min_range), chunks))
    else:
        ranges = [_cast_chunk(origin, d, meshes, camera.min_range) for d in chunks]
    t = np.concatenate(ranges) if ranges else np.empty(0)

    keep = np.isfinite(t) & (t >= camera.min_range) & (t <= camera.max_range)
    t = t[keep]
    if noise_std > 0.0 and t.size:
        generator = rng if rng is not None else np.random.default_rng(0)
        t = np.clip(t + generator.normal(0.0, noise_std, size=t.shape), camera.min_range, camera.max_range)
    points = origin + directions[keep] * t[:, None]
    logger.debug("Rendered %d/%d pixels from %s", points.shape[0], directions.shape[0], view.position)
    return PointCloud(points=points, sensor_origin=origin)


def object_points(scene: Scene, cloud: PointCloud, clearance: float) -> PointCloud:
    """Drop returns on the table plane (anything within `clearance` above it)."""
    if scene.table_height is None or cloud.is_empty:
        return cloud
    return cloud.select(cloud.points[:, 2] > scene.table_height + clearance)


class SensorService:
    """Renders scans of one scene with fixed intrinsics and a seeded noise stream."""

    def __init__(
        self,
        scene: Scene,
        camera: RangeCamera,
        *,
        noise_std: float = 0.0,
        seed: int = 0,
        workers: Optional[int] = None,
    ) -> None:
        self.scene = scene
        self.camera = camera
        self.noise_std = noise_std
        self.rng = np.random.default_rng(seed)
        self.workers = workers

    def scan(self, view: View) -> PointCloud:
        return render_scan(
            self.scene,
            view,
            self.camera,
            noise_std=self.noise_std,
            rng=self.rng,
            workers=self.workers,
        )
