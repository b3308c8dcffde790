"""
Exact incremental voxel traversal (Amanatides-Woo) for many rays at once.

All rays advance in lockstep: every iteration yields the voxel each still
active ray currently occupies, then steps that ray across the nearest voxel
boundary. A ray stops once its next boundary lies beyond its parameter limit
or it leaves the grid. Consumers may retire rays early with `stop()`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class WalkStep:
    ray_index: np.ndarray  # (k,) indices of rays active in this step
    cells: np.ndarray  # (k, 3) integer voxel indices
    t_enter: np.ndarray  # (k,) ray parameter (meters) where the cell is entered
    last: np.ndarray  # (k,) True where this is the ray's final cell


def clip_to_box(
    origins: np.ndarray,
    directions: np.ndarray,
    box_min: np.ndarray,
    box_max: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Slab test. Returns (t_near, t_far); a ray misses the box when t_near > t_far."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / directions
        t0 = (box_min - origins) * inv
        t1 = (box_max - origins) * inv
    lo = np.minimum(t0, t1)
    hi = np.maximum(t0, t1)
    # axis-parallel rays: inside the slab -> unconstrained, outside -> miss
    parallel = directions == 0.0
    if np.any(parallel):
        inside = (origins >= box_min) & (origins <= box_max)
        lo = np.where(parallel, np.where(inside, -np.inf, np.inf), lo)
        hi = np.where(parallel, np.where(inside, np.inf, -np.inf), hi)
    return lo.max(axis=1), hi.min(axis=1)


class VoxelWalk:
    """Lockstep traversal of `dims`-shaped grid voxels along rays.

    `origins`/`directions` are world-frame (N, 3) arrays; directions need not be
    normalised but `t_limit` is measured in units of their length.
    """

    def __init__(
        self,
        origins: np.ndarray,
        directions: np.ndarray,
        t_limit: np.ndarray,
        *,
        grid_origin: np.ndarray,
        voxel_size: float,
        dims: tuple[int, int, int],
    ) -> None:
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
        n = origins.shape[0]
        self.dims = np.asarray(dims, dtype=np.int64)
        self.voxel_size = float(voxel_size)

        # grid coordinates: one unit per voxel
        g0 = (origins - np.asarray(grid_origin, dtype=np.float64)) / self.voxel_size
        gd = directions / self.voxel_size
        t_near, t_far = clip_to_box(g0, gd, np.zeros(3), self.dims.astype(np.float64))

        t_start = np.maximum(t_near, 0.0)
        t_end = np.minimum(t_far, np.broadcast_to(np.asarray(t_limit, dtype=np.float64), (n,)))
        self.active = (t_start <= t_end) & np.isfinite(t_start)
        # rays that miss the box start nowhere; park them at t = 0
        t_start = np.where(self.active, t_start, 0.0)

        start = g0 + gd * t_start[:, None]
        cells = np.floor(start).astype(np.int64)
        cells = np.clip(cells, 0, self.dims - 1)

        step = np.sign(gd).astype(np.int64)
        with np.errstate(divide="ignore", invalid="ignore"):
            boundary = cells + (step > 0)
            t_max = np.where(step != 0, (boundary - g0) / gd, np.inf)
            t_delta = np.where(step != 0, np.abs(1.0 / gd), np.inf)

        self.cells = cells
        self.step = step
        self.t_max = t_max
        self.t_delta = t_delta
        self.t_enter = t_start
        self.t_end = t_end
        self.steps_taken = 0

    def stop(self, ray_index: np.ndarray) -> None:
        self.active[ray_index] = False

    def __iter__(self) -> Iterator[WalkStep]:
        while True:
            idx = np.flatnonzero(self.active)
            if idx.size == 0:
                return
            t_max = self.t_max[idx]
            axis = np.argmin(t_max, axis=1)
            t_next = t_max[np.arange(idx.size), axis]
            nxt = self.cells[idx].copy()
            nxt[np.arange(idx.size), axis] += self.step[idx, axis]
            leaves = (nxt[np.arange(idx.size), axis] < 0) | (
                nxt[np.arange(idx.size), axis] >= self.dims[axis]
            )
            last = (t_next > self.t_end[idx]) | leaves | ~np.isfinite(t_next)

            yield WalkStep(
                ray_index=idx,
                cells=self.cells[idx].copy(),
                t_enter=self.t_enter[idx].copy(),
                last=last,
            )

            # the consumer may have retired rays while handling the step
            still = self.active[idx] & ~last
            self.active[idx[last]] = False
            move = idx[still]
            if move.size:
                ax = axis[still]
                self.cells[move, ax] += self.step[move, ax]
                self.t_enter[move] = self.t_max[move, ax]
                self.t_max[move, ax] += self.t_delta[move, ax]
            self.steps_taken += 1


def traverse_segments(
    origins: np.ndarray,
    endpoints: np.ndarray,
    *,
    grid_origin: np.ndarray,
    voxel_size: float,
    dims: tuple[int, int, int],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Visit every voxel crossed by the segments origin -> endpoint.

    Returns (ray_index, cells, last) concatenated over all steps, in traversal
    order per ray. `last` marks the final in-grid cell of each segment.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    endpoints = np.atleast_2d(np.asarray(endpoints, dtype=np.float64))
    origins = np.broadcast_to(origins, endpoints.shape)
    directions = endpoints - origins
    walk = VoxelWalk(
        origins,
        directions,
        np.ones(endpoints.shape[0]),
        grid_origin=grid_origin,
        voxel_size=voxel_size,
        dims=dims,
    )
    ray_chunks, cell_chunks, last_chunks = [], [], []
    for step in walk:
        ray_chunks.append(step.ray_index)
        cell_chunks.append(step.cells)
        last_chunks.append(step.last)
    logger.debug("Traversed %d segments in %d lockstep iterations", endpoints.shape[0], walk.steps_taken)
    if not ray_chunks:
        return (
            np.empty(0, dtype=np.int64),
            np.empty((0, 3), dtype=np.int64),
            np.empty(0, dtype=bool),
        )
    return np.concatenate(ray_chunks), np.concatenate(cell_chunks), np.concatenate(last_chunks)
