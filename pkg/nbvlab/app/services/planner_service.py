"""
Next-best-view planners.

Candidate views are scored by casting one ray per camera pixel into the
partial model; the information-gain planner searches the whole view sphere,
the learned planners run one forward pass of an NBV-net.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from app.core import geometry
from app.core.config import settings
from app.core.errors import ArityMismatch, EmptyCandidateSet, InvalidGeometry, InvalidScale
from app.models.camera import RangeCamera
from app.models.occupancy_grid import NO_HIT, InputEncoding, OccupancyGrid
from app.models.view import View
from app.nn.network import NbvNet

logger = logging.getLogger(__name__)

DEFAULT_OVERLAP_MIN = 0.15

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

# Pole offsets for the Fibonacci lattice, by point count
_LATTICE_OFFSETS: tuple[tuple[int, float], ...] = (
    (24, 0.33),
    (177, 1.33),
    (890, 3.33),
    (11_000, 10.0),
    (39_000, 27.0),
    (600_000, 75.0),
)


def _lattice_offset(count: int) -> float:
    for limit, offset in _LATTICE_OFFSETS:
        if count < limit:
            return offset
    return 214.0


def fibonacci_directions(count: int) -> np.ndarray:
    """Quasi-uniform unit vectors; the pole offset keeps near-pole points from crowding."""
    eps = _lattice_offset(count)
    i = np.arange(count, dtype=np.float64)
    z = 1.0 - 2.0 * (i + eps) / (count - 1 + 2.0 * eps)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    theta = GOLDEN_ANGLE * i
    return np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)


@dataclass(frozen=True)
class ViewSphere:
    center: tuple[float, float, float]
    radius: float
    views: tuple[View, ...]

    def __len__(self) -> int:
        return len(self.views)

    @property
    def positions(self) -> np.ndarray:
        if not self.views:
            return np.empty((0, 3))
        return np.array([v.position for v in self.views])

    def unit_positions(self) -> np.ndarray:
        return (self.positions - np.asarray(self.center)) / self.radius

    def above(self, height: Optional[float]) -> "ViewSphere":
        """Drop candidates at or below a table plane."""
        if height is None:
            return self
        kept = tuple(v for v in self.views if v.position[2] > height)
        return ViewSphere(self.center, self.radius, kept)


@dataclass(frozen=True)
class ViewScore:
    view: View
    gain: int
    overlap: float
    occupied: int = 0


def generate_view_sphere(center: Sequence[float], radius: float, count: int) -> ViewSphere:
    if not radius > 0:
        raise InvalidGeometry(f"View sphere radius must be positive, got {radius}")
    if count < 1:
        raise InvalidGeometry(f"View sphere needs at least one view, got {count}")
    c = np.asarray(center, dtype=np.float64)
    positions = c + radius * fibonacci_directions(count)
    views = tuple(View.looking_at(p, c) for p in positions)
    return ViewSphere(center=(float(c[0]), float(c[1]), float(c[2])), radius=float(radius), views=views)


def initial_view(sphere: ViewSphere, axis: Sequence[float] = (0.0, -1.0, 0.0)) -> View:
    """Candidate whose direction from the centre is closest to `axis` (lowest index on ties)."""
    if not sphere.views:
        raise EmptyCandidateSet("View sphere has no candidates")
    direction = np.asarray(axis, dtype=np.float64)
    direction = direction / np.linalg.norm(direction)
    return sphere.views[int(np.argmax(sphere.unit_positions() @ direction))]


# ---------------------------------------------------------------------- scoring
def score_view(
    grid: OccupancyGrid,
    view: View,
    camera: RangeCamera,
    *,
    codes: Optional[np.ndarray] = None,
) -> ViewScore:
    """
    Pixel rays see through Unknown space until they reach the Occupied surface.

    gain = distinct Unknown voxels crossed before the surface. Each ray's
    first hit is its surface voxel, or its first Unknown voxel when it reaches
    no surface; overlap = distinct Occupied first hits over distinct first
    hits (0 without hits).
    """
    origin, directions = camera.world_rays(view)
    trace = grid.trace_many(origin[None, :], directions, camera.max_range, codes=codes)
    gain = np.unique(trace.unknown).size
    first_hits = np.where(trace.surface != NO_HIT, trace.surface, trace.first_unknown)
    first_hits = np.unique(first_hits[first_hits != NO_HIT])
    occupied = np.unique(trace.surface[trace.surface != NO_HIT]).size
    overlap = occupied / first_hits.size if first_hits.size else 0.0
    return ViewScore(view=view, gain=int(gain), overlap=float(overlap), occupied=int(occupied))


def score_candidates(
    grid: OccupancyGrid,
    views: Sequence[View],
    camera: RangeCamera,
    *,
    workers: Optional[int] = None,
) -> list[ViewScore]:
    """Scores in candidate order; the grid is only read."""
    codes = grid.state_codes()
    workers = settings.NBV_WORKERS if workers is None else max(1, workers)
    if workers > 1 and len(views) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            scores = list(pool.map(lambda v: score_view(grid, v, camera, codes=codes), views))
    else:
        scores = [score_view(grid, v, camera, codes=codes) for v in views]
    for index, score in enumerate(scores):
        logger.debug("candidate %d gain=%d overlap=%.3f", index, score.gain, score.overlap)
    return scores


def select_best(scores: Sequence[ViewScore], overlap_min: float) -> int:
    """
    Index of the highest-gain candidate meeting the overlap constraint, lowest
    index on ties; falls back to the unconstrained argmax when none qualifies.
    """
    if not scores:
        raise EmptyCandidateSet("No candidate views to choose from")
    gains = np.array([s.gain for s in scores], dtype=np.int64)
    feasible = np.array([s.overlap >= overlap_min for s in scores])
    if np.any(feasible):
        return int(np.argmax(np.where(feasible, gains, -1)))
    logger.warning("No candidate reaches overlap %.2f; relaxing the constraint", overlap_min)
    return int(np.argmax(gains))


def exhaustive_nbv(
    grid: OccupancyGrid,
    sphere: ViewSphere,
    camera: RangeCamera,
    overlap_min: float = DEFAULT_OVERLAP_MIN,
    *,
    workers: Optional[int] = None,
) -> View:
    if not sphere.views:
        raise EmptyCandidateSet("View sphere has no candidates")
    scores = score_candidates(grid, sphere.views, camera, workers=workers)
    return sphere.views[select_best(scores, overlap_min)]


# ---------------------------------------------------------------------- learned planners
def _single_input(grid: OccupancyGrid, encoding: InputEncoding) -> np.ndarray:
    return grid.to_input_tensor(encoding)[None, None]


def classification_nbv(
    grid: OccupancyGrid,
    net: NbvNet,
    class_views: Sequence[View],
    *,
    encoding: InputEncoding = "probability",
) -> View:
    if not class_views:
        raise EmptyCandidateSet("Classification planner has no class views")
    if net.output_width != len(class_views):
        raise ArityMismatch(
            f"Network predicts {net.output_width} classes but {len(class_views)} class views were given"
        )
    logits = net.predict(_single_input(grid, encoding))[0]
    return class_views[int(np.argmax(logits))]


def regression_nbv(
    grid: OccupancyGrid,
    net: NbvNet,
    k: float,
    center: Sequence[float] = (0.0, 0.0, 0.0),
    *,
    encoding: InputEncoding = "probability",
) -> View:
    """Predicted unit position scaled by k about the object centre, gazing at the centre."""
    if net.output_width != 3:
        raise ArityMismatch(f"Regression network must output 3 values, got {net.output_width}")
    p_hat = net.predict(_single_input(grid, encoding))[0]
    c = np.asarray(center, dtype=np.float64)
    position = c + geometry.scale_position(p_hat, k)
    return View.looking_at(position, c)


# ---------------------------------------------------------------------- planner objects
class NbvPlanner(ABC):
    """Strategy that proposes the next sensor pose for a partial model."""

    name: str = "planner"

    @abstractmethod
    def plan(self, grid: OccupancyGrid) -> View:
        raise NotImplementedError


class InfoGainPlanner(NbvPlanner):
    name = "infogain"

    def __init__(
        self,
        sphere: ViewSphere,
        camera: RangeCamera,
        overlap_min: float = DEFAULT_OVERLAP_MIN,
        *,
        workers: Optional[int] = None,
    ) -> None:
        self.sphere = sphere
        self.camera = camera
        self.overlap_min = overlap_min
        self.workers = workers

    def plan(self, grid: OccupancyGrid) -> View:
        return exhaustive_nbv(grid, self.sphere, self.camera, self.overlap_min, workers=self.workers)


class ClassificationPlanner(NbvPlanner):
    name = "classification"

    def __init__(self, net: NbvNet, class_views: Sequence[View], *, encoding: InputEncoding = "probability") -> None:
        if net.output_width != len(class_views):
            raise ArityMismatch(
                f"Network predicts {net.output_width} classes but {len(class_views)} class views were given"
            )
        self.net = net.eval()
        self.class_views = list(class_views)
        self.encoding = encoding

    def plan(self, grid: OccupancyGrid) -> View:
        return classification_nbv(grid, self.net, self.class_views, encoding=self.encoding)


class RegressionPlanner(NbvPlanner):
    name = "regression"

    def __init__(
        self,
        net: NbvNet,
        k: float,
        center: Sequence[float] = (0.0, 0.0, 0.0),
        *,
        encoding: InputEncoding = "probability",
    ) -> None:
        if net.output_width != 3:
            raise ArityMismatch(f"Regression network must output 3 values, got {net.output_width}")
        if not k > 0:
            raise InvalidScale(f"Scale factor must be positive, got {k}")
        self.net = net.eval()
        self.k = k
        self.center = tuple(float(v) for v in center)
        self.encoding = encoding

    def plan(self, grid: OccupancyGrid) -> View:
        return regression_nbv(grid, self.net, self.k, self.center, encoding=self.encoding)
