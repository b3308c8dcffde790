"""Point cloud value type and its ASCII export."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from app.core.errors import InvalidGeometry, NbvIOError


@dataclass
class PointCloud:
    """World-frame measurements plus the sensor origin they were taken from."""

    points: np.ndarray = field(default_factory=lambda: np.empty((0, 3)))
    sensor_origin: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        self.sensor_origin = np.asarray(self.sensor_origin, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(self.points)):
            raise InvalidGeometry("Point cloud contains non-finite coordinates")

    def __len__(self) -> int:
        return int(self.points.shape[0])

    @property
    def is_empty(self) -> bool:
        return self.points.shape[0] == 0

    def select(self, mask: np.ndarray) -> "PointCloud":
        return PointCloud(points=self.points[mask], sensor_origin=self.sensor_origin)

    def extended(self, other: "PointCloud") -> "PointCloud":
        """New cloud with `other`'s points appended (keeps this sensor origin)."""
        return PointCloud(
            points=np.vstack([self.points, other.points]),
            sensor_origin=self.sensor_origin,
        )

    @classmethod
    def merge(cls, clouds: Iterable["PointCloud"]) -> "PointCloud":
        clouds = list(clouds)
        if not clouds:
            return cls()
        return cls(
            points=np.vstack([c.points for c in clouds]),
            sensor_origin=clouds[-1].sensor_origin,
        )

    def write_xyz(self, path: str | Path) -> None:
        """ASCII export: one `x y z` line per point."""
        try:
            with open(path, "w", encoding="utf-8") as fh:
                for x, y, z in self.points:
                    fh.write(f"{x:.9g} {y:.9g} {z:.9g}\n")
        except OSError as exc:
            raise NbvIOError(f"Cannot write point cloud to {path}: {exc}") from exc

    @classmethod
    def read_xyz(cls, path: str | Path) -> "PointCloud":
        try:
            data = np.loadtxt(path, dtype=np.float64, ndmin=2)
        except OSError as exc:
            raise NbvIOError(f"Cannot read point cloud {path}: {exc}") from exc
        return cls(points=data.reshape(-1, 3))
