"""
Dense probabilistic occupancy grid (the partial model).

Cells store log-odds. Scans are fused with the binary Bayes filter: every
voxel crossed by a measurement ray receives the miss increment, the voxel
holding the return receives the hit increment, and values are clamped so
probabilities stay strictly inside (0, 1).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from app.core.errors import IndexOutOfBounds, InvalidDims, NbvIOError, WrongDims
from app.core.voxel_traversal import VoxelWalk, traverse_segments
from app.models.point_cloud import PointCloud

logger = logging.getLogger(__name__)


def log_odds(p: float) -> float:
    return math.log(p / (1.0 - p))


# Sensor model and clamping bounds (Octomap defaults)
P_HIT = 0.7
P_MISS = 0.4
L_HIT = log_odds(P_HIT)
L_MISS = log_odds(P_MISS)
L_MIN = log_odds(0.12)
L_MAX = log_odds(0.97)

# Dead-band around the uninformative prior
STATE_THRESHOLD = 0.05

NETWORK_GRID_DIMS = (32, 32, 32)

InputEncoding = Literal["probability", "ternary"]


class VoxelState(str, Enum):
    UNKNOWN = "unknown"
    FREE = "free"
    OCCUPIED = "occupied"


# Integer codes used by vectorised state arrays
STATE_UNKNOWN = 0
STATE_FREE = 1
STATE_OCCUPIED = 2
NO_HIT = -1


@dataclass(slots=True)
class RayTrace:
    unknown: np.ndarray  # linear indices of Unknown voxels crossed before each ray's surface, repeats kept
    surface: np.ndarray  # (N,) linear index of the first Occupied voxel per ray, NO_HIT if none
    first_unknown: np.ndarray  # (N,) linear index of the first Unknown voxel per ray, NO_HIT if none


STATE_BY_CODE = {
    STATE_UNKNOWN: VoxelState.UNKNOWN,
    STATE_FREE: VoxelState.FREE,
    STATE_OCCUPIED: VoxelState.OCCUPIED,
}


class OccupancyGrid:
    def __init__(
        self,
        dims: Sequence[int],
        voxel_size: float,
        origin: Sequence[float],
        log_odds_values: np.ndarray | None = None,
    ) -> None:
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise InvalidDims(f"Grid dims must be three positive integers, got {dims}")
        if not voxel_size > 0:
            raise InvalidDims(f"Voxel size must be positive, got {voxel_size}")
        self.dims: tuple[int, int, int] = dims
        self.voxel_size = float(voxel_size)
        self.origin = np.asarray(origin, dtype=np.float64).reshape(3)
        if log_odds_values is None:
            self.log_odds = np.zeros(dims, dtype=np.float64)
        else:
            values = np.asarray(log_odds_values, dtype=np.float64)
            if values.shape != dims:
                raise InvalidDims(f"Log-odds array shape {values.shape} does not match dims {dims}")
            self.log_odds = np.clip(values, L_MIN, L_MAX)

    # ------------------------------------------------------------------ construction
    @classmethod
    def new(cls, center: Sequence[float], span: float, dims: Sequence[int]) -> "OccupancyGrid":
        """Cubic-voxel grid of edge `span` centred on `center`, every cell Unknown."""
        dims = tuple(int(d) for d in dims)
        if not span > 0:
            raise InvalidDims(f"Grid span must be positive, got {span}")
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise InvalidDims(f"Grid dims must be three positive integers, got {dims}")
        if len(set(dims)) != 1:
            raise InvalidDims(f"Cubic voxels over a cubic span need m = n = o, got {dims}")
        voxel_size = float(span) / dims[0]
        origin = np.asarray(center, dtype=np.float64) - float(span) / 2.0
        return cls(dims, voxel_size, origin)

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.dims, self.voxel_size, self.origin.copy(), self.log_odds.copy())

    # ------------------------------------------------------------------ geometry
    @property
    def span(self) -> np.ndarray:
        return np.asarray(self.dims, dtype=np.float64) * self.voxel_size

    @property
    def center(self) -> np.ndarray:
        return self.origin + self.span / 2.0

    def linear_index(self, cells: np.ndarray) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.int64).reshape(-1, 3)
        return np.ravel_multi_index((cells[:, 0], cells[:, 1], cells[:, 2]), self.dims)

    def cell_of(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(cells, inside) for world points; cells are only meaningful where inside."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        g = (pts - self.origin) / self.voxel_size
        cells = np.floor(g).astype(np.int64)
        inside = np.all((cells >= 0) & (cells < np.asarray(self.dims)), axis=1)
        return cells, inside

    def voxel_centers(self, cells: np.ndarray) -> np.ndarray:
        cells = np.asarray(cells, dtype=np.float64).reshape(-1, 3)
        return self.origin + (cells + 0.5) * self.voxel_size

    # ------------------------------------------------------------------ queries
    def probabilities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.log_odds))

    def state_codes(self) -> np.ndarray:
        p = self.probabilities()
        codes = np.full(self.dims, STATE_UNKNOWN, dtype=np.int8)
        codes[p > 0.5 + STATE_THRESHOLD] = STATE_OCCUPIED
        codes[p < 0.5 - STATE_THRESHOLD] = STATE_FREE
        return codes

    def _check_index(self, index: Sequence[int]) -> tuple[int, int, int]:
        idx = tuple(int(i) for i in index)
        if len(idx) != 3 or any(i < 0 or i >= d for i, d in zip(idx, self.dims)):
            raise IndexOutOfBounds(f"Voxel index {tuple(index)} outside grid dims {self.dims}")
        return idx

    def voxel_state(self, index: Sequence[int]) -> VoxelState:
        i, j, k = self._check_index(index)
        p = 1.0 / (1.0 + math.exp(-self.log_odds[i, j, k]))
        if p > 0.5 + STATE_THRESHOLD:
            return VoxelState.OCCUPIED
        if p < 0.5 - STATE_THRESHOLD:
            return VoxelState.FREE
        return VoxelState.UNKNOWN

    def count_states(self) -> dict[str, int]:
        codes = self.state_codes()
        return {state.value: int(np.count_nonzero(codes == code)) for code, state in STATE_BY_CODE.items()}

    # ------------------------------------------------------------------ updates
    def integrate_scan(self, cloud: PointCloud, max_range: float | None = None) -> "OccupancyGrid":
        """
        Fuse one registered scan. Within a scan each voxel is updated at most once
        as a hit and at most once as a miss; a voxel that is both counts as a hit.
        """
        if cloud.is_empty:
            return self
        origin = cloud.sensor_origin
        if not np.all(np.isfinite(origin)):
            raise InvalidDims("Sensor origin must be finite")

        points = cloud.points
        rays = points - origin
        lengths = np.linalg.norm(rays, axis=1)
        records_hit = np.ones(points.shape[0], dtype=bool)
        if max_range is not None:
            too_far = lengths > max_range
            if np.any(too_far):
                scale = np.where(too_far, max_range / np.where(lengths > 0, lengths, 1.0), 1.0)
                points = origin + rays * scale[:, None]
                records_hit = ~too_far

        _, cells, _ = traverse_segments(
            origin[None, :],
            points,
            grid_origin=self.origin,
            voxel_size=self.voxel_size,
            dims=self.dims,
        )

        end_cells, inside = self.cell_of(points)
        hit_mask = inside & records_hit
        hits = np.unique(self.linear_index(end_cells[hit_mask])) if np.any(hit_mask) else np.empty(0, np.int64)
        crossed = np.unique(self.linear_index(cells)) if cells.size else np.empty(0, np.int64)
        misses = np.setdiff1d(crossed, hits, assume_unique=True)

        flat = self.log_odds.reshape(-1)
        flat[misses] += L_MISS
        flat[hits] += L_HIT
        np.clip(flat, L_MIN, L_MAX, out=flat)
        logger.debug(
            "Integrated %d points: %d hit voxels, %d miss voxels", points.shape[0], hits.size, misses.size
        )
        return self

    # ------------------------------------------------------------------ ray casting
    def raycast_many(
        self,
        origins: np.ndarray,
        directions: np.ndarray,
        max_range: float,
        *,
        codes: np.ndarray | None = None,
    ) -> tuple[np.ndarray, np.ndarray]:
        """
        First non-Free voxel along each ray.

        Returns (cells, states): cells is (N, 3) with -1 rows for rays that leave
        the grid or run out of range through Free space only; states holds the
        integer state code or NO_HIT.
        """
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        n = max(origins.shape[0], directions.shape[0])
        origins = np.broadcast_to(origins, (n, 3))
        directions = np.broadcast_to(directions, (n, 3))
        flat_codes = (self.state_codes() if codes is None else codes).reshape(-1)

        first = np.full((n, 3), -1, dtype=np.int64)
        states = np.full(n, NO_HIT, dtype=np.int8)
        walk = VoxelWalk(
            origins,
            directions,
            np.full(n, float(max_range)),
            grid_origin=self.origin,
            voxel_size=self.voxel_size,
            dims=self.dims,
        )
        for step in walk:
            found = flat_codes[self.linear_index(step.cells)]
            blocked = found != STATE_FREE
            if np.any(blocked):
                rays = step.ray_index[blocked]
                first[rays] = step.cells[blocked]
                states[rays] = found[blocked]
                walk.stop(rays)
        return first, states

    def trace_many(
        self,
        origins: np.ndarray,
        directions: np.ndarray,
        max_range: float,
        *,
        codes: np.ndarray | None = None,
    ) -> RayTrace:
        """
        Walk each ray through Free and Unknown space up to its first Occupied
        voxel. The Unknown voxels crossed on the way are what a scan from this
        origin could still reveal.
        """
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        n = max(origins.shape[0], directions.shape[0])
        origins = np.broadcast_to(origins, (n, 3))
        directions = np.broadcast_to(directions, (n, 3))
        flat_codes = (self.state_codes() if codes is None else codes).reshape(-1)

        surface = np.full(n, NO_HIT, dtype=np.int64)
        first_unknown = np.full(n, NO_HIT, dtype=np.int64)
        unknown_chunks: list[np.ndarray] = []
        walk = VoxelWalk(
            origins,
            directions,
            np.full(n, float(max_range)),
            grid_origin=self.origin,
            voxel_size=self.voxel_size,
            dims=self.dims,
        )
        for step in walk:
            linear = self.linear_index(step.cells)
            found = flat_codes[linear]
            unknown = found == STATE_UNKNOWN
            if np.any(unknown):
                cells = linear[unknown]
                unknown_chunks.append(cells)
                rays = step.ray_index[unknown]
                fresh = first_unknown[rays] == NO_HIT
                first_unknown[rays[fresh]] = cells[fresh]
            occupied = found == STATE_OCCUPIED
            if np.any(occupied):
                rays = step.ray_index[occupied]
                surface[rays] = linear[occupied]
                walk.stop(rays)
        unknown_cells = np.concatenate(unknown_chunks) if unknown_chunks else np.empty(0, dtype=np.int64)
        return RayTrace(unknown=unknown_cells, surface=surface, first_unknown=first_unknown)

    def raycast(
        self,
        origin: Sequence[float],
        direction: Sequence[float],
        max_range: float,
    ) -> tuple[tuple[int, int, int], VoxelState] | None:
        cells, states = self.raycast_many(np.asarray(origin)[None, :], np.asarray(direction)[None, :], max_range)
        if states[0] == NO_HIT:
            return None
        i, j, k = (int(v) for v in cells[0])
        return (i, j, k), STATE_BY_CODE[int(states[0])]

    # ------------------------------------------------------------------ network input
    def to_input_tensor(self, encoding: InputEncoding = "probability") -> np.ndarray:
        """32^3 array of occupancy probabilities (or ternary 0 / 0.5 / 1 codes)."""
        if self.dims != NETWORK_GRID_DIMS:
            raise WrongDims(f"Network input needs a {NETWORK_GRID_DIMS} grid, got {self.dims}")
        if encoding == "probability":
            return self.probabilities()
        codes = self.state_codes()
        tensor = np.full(self.dims, 0.5)
        tensor[codes == STATE_FREE] = 0.0
        tensor[codes == STATE_OCCUPIED] = 1.0
        return tensor

    # ------------------------------------------------------------------ export
    def to_text_lines(self) -> list[str]:
        m, n, o = self.dims
        ox, oy, oz = self.origin
        lines = [f"dims {m} {n} {o} voxel_size {self.voxel_size:.9g} origin {ox:.9g} {oy:.9g} {oz:.9g}"]
        codes = self.state_codes()
        known = np.argwhere(codes != STATE_UNKNOWN)
        if known.size:
            centers = self.voxel_centers(known)
            probs = self.probabilities()[known[:, 0], known[:, 1], known[:, 2]]
            for (x, y, z), p in zip(centers, probs):
                lines.append(f"{x:.9g} {y:.9g} {z:.9g} {p:.6f}")
        return lines

    def write_text(self, path: str | Path) -> None:
        try:
            Path(path).write_text("\n".join(self.to_text_lines()) + "\n", encoding="utf-8")
        except OSError as exc:
            raise NbvIOError(f"Cannot write grid export to {path}: {exc}") from exc


def new_grid(center: Sequence[float], span: float, dims: Sequence[int] = NETWORK_GRID_DIMS) -> OccupancyGrid:
    return OccupancyGrid.new(center, span, dims)
