"""
`gen-dataset`: ground-truth NBV samples by exhaustive search over the configured objects.
"""

from __future__ import annotations

import logging

from app.commands.common import build_scenes, candidate_sphere
from app.models.sample import Dataset
from app.schemas.dataset import DatasetSummary
from app.schemas.run_config import RunConfig
from app.services import dataset_service

logger = logging.getLogger(__name__)


def _summary(dataset: Dataset, path: str, verified: float | None) -> DatasetSummary:
    per_object = dict(sorted(dataset.object_counts().items()))
    return DatasetSummary(path=path, samples=len(dataset), per_object=per_object, verified_fraction=verified)


def run(config: RunConfig) -> DatasetSummary:
    path = config.output_path(config.dataset.path)
    camera = config.camera.build()
    scenes = build_scenes(config)

    if config.dataset.verify_only:
        dataset = dataset_service.read_dataset(path)
        fraction = dataset_service.verify_dataset(
            dataset, camera, scenes={s.object_id: s.scene for s in scenes}
        )
        return _summary(dataset, str(path), fraction)

    sphere = candidate_sphere(config)
    samples = []
    for item in scenes:
        logger.info("Generating samples for object %d (%s)", item.object_id, item.name)
        samples.extend(
            dataset_service.generate_for_object(
                item.scene,
                camera,
                sphere,
                config.dataset.runs_per_object,
                config.dataset.scans_per_run,
                config.seed,
                grid_span=config.grid.span,
                object_id=item.object_id,
                overlap_min=config.planner.overlap_min,
                gain_mode=config.dataset.gain_mode,
                encoding=config.grid.encoding,
                noise_std=config.camera.noise_std,
            )
        )

    metadata = dataset_service.build_metadata(
        sphere,
        overlap_min=config.planner.overlap_min,
        gain_mode=config.dataset.gain_mode,
        encoding=config.grid.encoding,
        seed=config.seed,
        runs_per_object=config.dataset.runs_per_object,
        scans_per_run=config.dataset.scans_per_run,
        objects=[s.name for s in scenes],
        grid_span=config.grid.span,
        camera=camera,
    )
    dataset = Dataset(samples=samples, metadata=metadata)
    dataset_service.write_dataset(dataset, path)

    fraction = None
    if config.dataset.verify:
        fraction = dataset_service.verify_dataset(dataset, camera, scenes={s.object_id: s.scene for s in scenes})
    return _summary(dataset, str(path), fraction)
