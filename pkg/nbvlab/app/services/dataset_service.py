"""
Ground-truth dataset generation and the NBVD dataset file.

Each generation run starts from a seeded random candidate, then alternates
scan, integrate and exhaustive NBV search. Before every planning step the
grid snapshot and the chosen candidate (divided by the sphere radius) form
one sample.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np

from app.core import binary_format as bf
from app.core.errors import EmptyCandidateSet, EmptyDataset, InvalidGeometry
from app.core.seeding import component_seed
from app.models.camera import RangeCamera
from app.models.mesh import Scene
from app.models.occupancy_grid import (
    L_HIT,
    L_MISS,
    NETWORK_GRID_DIMS,
    STATE_OCCUPIED,
    InputEncoding,
    OccupancyGrid,
)
from app.models.sample import Dataset, Sample
from app.models.view import View
from app.schemas.dataset import DatasetMetadata
from app.services.planner_service import (
    DEFAULT_OVERLAP_MIN,
    ViewScore,
    ViewSphere,
    score_candidates,
    select_best,
)
from app.services.sensor_service import SensorService, render_scan

logger = logging.getLogger(__name__)

MAGIC = b"NBVD"
VERSION = 1

GainMode = Literal["visible", "simulated"]

SAMPLE_DTYPE = np.dtype(
    [
        ("tensor", "<f4", NETWORK_GRID_DIMS),
        ("label", "<f4", (3,)),
        ("object_id", "<u4"),
        ("scan_index", "<u4"),
    ]
)

# labels within this distance of a candidate unit position name that candidate
LABEL_MATCH_TOL = 1e-5


def simulated_scores(
    scene: Scene,
    grid: OccupancyGrid,
    views: Sequence,
    camera: RangeCamera,
    *,
    workers: Optional[int] = None,
) -> list[ViewScore]:
    """
    Gain measured by actually scanning each candidate into a copy of the grid
    and counting voxels that become Occupied. Overlap still comes from the
    visibility scoring.
    """
    visible = score_candidates(grid, views, camera, workers=workers)
    before = grid.state_codes() == STATE_OCCUPIED
    scores = []
    for score in visible:
        trial = grid.copy()
        trial.integrate_scan(render_scan(scene, score.view, camera, workers=workers), camera.max_range)
        gained = int(np.count_nonzero((trial.state_codes() == STATE_OCCUPIED) & ~before))
        scores.append(ViewScore(view=score.view, gain=gained, overlap=score.overlap, occupied=score.occupied))
    return scores


def candidate_scores(
    grid: OccupancyGrid,
    sphere: ViewSphere,
    camera: RangeCamera,
    *,
    gain_mode: GainMode = "visible",
    scene: Optional[Scene] = None,
    workers: Optional[int] = None,
) -> list[ViewScore]:
    if gain_mode == "simulated":
        if scene is None:
            raise InvalidGeometry("Simulated gain needs the scene to render candidates")
        return simulated_scores(scene, grid, sphere.views, camera, workers=workers)
    return score_candidates(grid, sphere.views, camera, workers=workers)


def generate_for_object(
    scene: Scene,
    camera: RangeCamera,
    sphere: ViewSphere,
    n_reconstructions: int,
    scans_per_run: int,
    seed: int,
    *,
    grid_span: float,
    grid_dims: tuple[int, int, int] = NETWORK_GRID_DIMS,
    object_id: int = 0,
    overlap_min: float = DEFAULT_OVERLAP_MIN,
    gain_mode: GainMode = "visible",
    encoding: InputEncoding = "probability",
    noise_std: float = 0.0,
    workers: Optional[int] = None,
) -> list[Sample]:
    if not sphere.views:
        raise EmptyCandidateSet("View sphere has no candidates")
    if scans_per_run < 2:
        raise InvalidGeometry(f"scans_per_run must be at least 2, got {scans_per_run}")
    center = np.asarray(sphere.center)
    samples: list[Sample] = []
    for run in range(n_reconstructions):
        rng = np.random.default_rng(component_seed(seed, f"dataset:{object_id}:{run}"))
        sensor = SensorService(
            scene, camera, noise_std=noise_std, seed=component_seed(seed, f"noise:{object_id}:{run}"), workers=workers
        )
        view = sphere.views[int(rng.integers(len(sphere.views)))]
        grid = OccupancyGrid.new(center, grid_span, grid_dims)
        for scan_index in range(scans_per_run):
            grid.integrate_scan(sensor.scan(view), camera.max_range)
            if scan_index == scans_per_run - 1:
                break
            scores = candidate_scores(grid, sphere, camera, gain_mode=gain_mode, scene=scene, workers=workers)
            best = scores[select_best(scores, overlap_min)].view
            label = (best.origin - center) / sphere.radius
            samples.append(
                Sample(
                    grid_tensor=grid.to_input_tensor(encoding),
                    nbv_unit_position=label,
                    object_id=object_id,
                    scan_index=scan_index,
                )
            )
            view = best
        logger.info("Object %d run %d: %d samples so far", object_id, run + 1, len(samples))
    return samples


def build_metadata(
    sphere: ViewSphere,
    *,
    overlap_min: float,
    gain_mode: GainMode,
    encoding: InputEncoding,
    seed: int,
    runs_per_object: int,
    scans_per_run: int,
    objects: Sequence[str],
    grid_span: float,
    camera: RangeCamera,
) -> DatasetMetadata:
    return DatasetMetadata(
        sphere_radius=sphere.radius,
        sphere_center=list(sphere.center),
        candidate_count=len(sphere.views),
        candidates=sphere.unit_positions().tolist(),
        overlap_min=overlap_min,
        gain_mode=gain_mode,
        encoding=encoding,
        seed=seed,
        runs_per_object=runs_per_object,
        scans_per_run=scans_per_run,
        objects=list(objects),
        grid_center=list(sphere.center),
        grid_span=grid_span,
        camera={
            "fov_h": camera.fov_h,
            "fov_v": camera.fov_v,
            "res_u": camera.res_u,
            "res_v": camera.res_v,
            "min_range": camera.min_range,
            "max_range": camera.max_range,
        },
    )


# ---------------------------------------------------------------------- split
def split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the first ceil(f * n) samples train and the rest validate."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    n = len(dataset)
    if n == 0:
        raise EmptyDataset("Cannot split an empty dataset")
    order = np.random.default_rng(seed).permutation(n)
    n_train = min(n, math.ceil(round(train_fraction * n, 9)))
    return dataset.subset(order[:n_train].tolist()), dataset.subset(order[n_train:].tolist())


# ---------------------------------------------------------------------- file format
def encode_dataset(dataset: Dataset) -> bytes:
    meta = dataset.metadata.model_dump_json().encode("utf-8")
    records = np.zeros(len(dataset.samples), dtype=SAMPLE_DTYPE)
    if dataset.samples:
        records["tensor"] = np.stack([s.grid_tensor for s in dataset.samples])
        records["label"] = np.stack([s.nbv_unit_position for s in dataset.samples])
        records["object_id"] = [s.object_id for s in dataset.samples]
        records["scan_index"] = [s.scan_index for s in dataset.samples]
    body = [MAGIC, bf.pack_u32(VERSION), bf.pack_u32(len(meta)), meta, bf.pack_u64(len(records)), records.tobytes()]
    return bf.seal(b"".join(body))


def decode_dataset(data: bytes, label: str = "dataset") -> Dataset:
    reader = bf.BinaryReader(data, magic=MAGIC, version=VERSION, label=label)
    try:
        meta_raw = json.loads(reader.take(reader.u32()).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise bf.NbvIOError(f"{label}: unreadable metadata block") from exc
    count = reader.u64()
    records = reader.array(SAMPLE_DTYPE, count)
    reader.finish()
    metadata = DatasetMetadata.model_validate(meta_raw)
    samples = [
        Sample(
            grid_tensor=r["tensor"].copy(),
            nbv_unit_position=r["label"].copy(),
            object_id=int(r["object_id"]),
            scan_index=int(r["scan_index"]),
        )
        for r in records
    ]
    return Dataset(samples=samples, metadata=metadata)


def write_dataset(dataset: Dataset, path: str | Path) -> None:
    bf.atomic_write_bytes(path, encode_dataset(dataset))
    logger.info("Wrote %d samples to %s", len(dataset), path)


def read_dataset(path: str | Path) -> Dataset:
    dataset = decode_dataset(bf.read_file_bytes(path), label=str(path))
    logger.info("Read %d samples from %s", len(dataset), path)
    return dataset


# ---------------------------------------------------------------------- verification
def grid_from_snapshot(tensor: np.ndarray, metadata: DatasetMetadata) -> OccupancyGrid:
    """Rebuild a grid whose voxel states match a stored snapshot."""
    grid = OccupancyGrid.new(metadata.grid_center, metadata.grid_span, NETWORK_GRID_DIMS)
    t = np.asarray(tensor, dtype=np.float64)
    if metadata.encoding == "ternary":
        values = np.where(t >= 1.0, L_HIT, np.where(t <= 0.0, L_MISS, 0.0))
    else:
        p = np.clip(t, 1e-12, 1.0 - 1e-12)
        values = np.log(p / (1.0 - p))
    return OccupancyGrid(grid.dims, grid.voxel_size, grid.origin, values)


def sphere_from_metadata(metadata: DatasetMetadata) -> ViewSphere:
    center = np.asarray(metadata.sphere_center)
    views = tuple(View.looking_at(center + metadata.sphere_radius * np.asarray(u), center) for u in metadata.candidates)
    return ViewSphere(tuple(metadata.sphere_center), metadata.sphere_radius, views)


def candidate_index(label: np.ndarray, metadata: DatasetMetadata) -> int:
    """Index of the candidate a label points at, or -1."""
    if not metadata.candidates:
        return -1
    dist = np.linalg.norm(np.asarray(metadata.candidates) - np.asarray(label, dtype=np.float64), axis=1)
    index = int(np.argmin(dist))
    return index if dist[index] <= LABEL_MATCH_TOL else -1


def verify_dataset(
    dataset: Dataset,
    camera: RangeCamera,
    *,
    scenes: Optional[dict[int, Scene]] = None,
    workers: Optional[int] = None,
) -> float:
    """Fraction of samples whose label is still the selected candidate when re-scored."""
    if len(dataset) == 0:
        raise EmptyDataset("Nothing to verify")
    meta = dataset.metadata
    sphere = sphere_from_metadata(meta)
    valid = 0
    for i, sample in enumerate(dataset.samples):
        expected = candidate_index(sample.nbv_unit_position, meta)
        if expected < 0:
            logger.warning("Sample %d label is not a candidate position", i)
            continue
        grid = grid_from_snapshot(sample.grid_tensor, meta)
        scene = (scenes or {}).get(sample.object_id)
        scores = candidate_scores(grid, sphere, camera, gain_mode=meta.gain_mode, scene=scene, workers=workers)
        chosen = select_best(scores, meta.overlap_min)
        if chosen == expected:
            valid += 1
        else:
            logger.warning("Sample %d: label is candidate %d but re-scoring picks %d", i, expected, chosen)
    fraction = valid / len(dataset)
    logger.info("Verified %d/%d samples (%.1f%%)", valid, len(dataset), 100.0 * fraction)
    return fraction
