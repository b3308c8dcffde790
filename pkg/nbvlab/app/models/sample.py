"""Dataset records: grid snapshot plus unit-normalised NBV label."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from app.core.errors import InvalidGeometry, WrongDims
from app.models.occupancy_grid import NETWORK_GRID_DIMS
from app.schemas.dataset import DatasetMetadata

LABEL_NORM_TOL = 1e-6


@dataclass
class Sample:
    grid_tensor: np.ndarray
    nbv_unit_position: np.ndarray
    object_id: int
    scan_index: int

    def __post_init__(self) -> None:
        self.grid_tensor = np.asarray(self.grid_tensor, dtype=np.float32)
        self.nbv_unit_position = np.asarray(self.nbv_unit_position, dtype=np.float32).reshape(3)
        if self.grid_tensor.shape != NETWORK_GRID_DIMS:
            raise WrongDims(f"Sample tensor must be {NETWORK_GRID_DIMS}, got {self.grid_tensor.shape}")
        norm = float(np.linalg.norm(self.nbv_unit_position.astype(np.float64)))
        if abs(norm - 1.0) > LABEL_NORM_TOL:
            raise InvalidGeometry(f"Sample label must be a unit vector, norm is {norm}")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.object_id == other.object_id
            and self.scan_index == other.scan_index
            and np.array_equal(self.grid_tensor, other.grid_tensor)
            and np.array_equal(self.nbv_unit_position, other.nbv_unit_position)
        )


@dataclass
class Dataset:
    samples: list[Sample] = field(default_factory=list)
    metadata: DatasetMetadata = field(default_factory=DatasetMetadata)

    def __len__(self) -> int:
        return len(self.samples)

    def inputs(self) -> np.ndarray:
        """(N, 1, 32, 32, 32) float64 network inputs."""
        if not self.samples:
            return np.empty((0, 1, *NETWORK_GRID_DIMS))
        return np.stack([s.grid_tensor for s in self.samples]).astype(np.float64)[:, None]

    def labels(self) -> np.ndarray:
        if not self.samples:
            return np.empty((0, 3))
        return np.stack([s.nbv_unit_position for s in self.samples]).astype(np.float64)

    def subset(self, indices) -> "Dataset":
        return Dataset([self.samples[i] for i in indices], self.metadata.model_copy(deep=True))

    def object_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for s in self.samples:
            name = (
                self.metadata.objects[s.object_id]
                if s.object_id < len(self.metadata.objects)
                else str(s.object_id)
            )
            counts[name] = counts.get(name, 0) + 1
        return counts
