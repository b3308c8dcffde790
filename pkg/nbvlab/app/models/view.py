"""Sensor pose value type."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.core import geometry


@dataclass(frozen=True)
class View:
    """6-DOF sensor pose: world-frame position (meters) plus yaw/pitch/roll (radians)."""

    position: tuple[float, float, float]
    yaw: float
    pitch: float
    roll: float = 0.0

    @classmethod
    def looking_at(cls, position: Sequence[float], center: Sequence[float]) -> "View":
        yaw, pitch, roll = geometry.orientation_from_position(position, center)
        x, y, z = (float(v) for v in position)
        return cls(position=(x, y, z), yaw=yaw, pitch=pitch, roll=roll)

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.position, dtype=np.float64)

    def rotation(self) -> np.ndarray:
        return geometry.rotation_from_tait_bryan(self.yaw, self.pitch, self.roll)

    def director_ray(self) -> np.ndarray:
        return self.rotation() @ geometry.SENSOR_AXIS

    def as_row(self) -> list[float]:
        return [*self.position, self.yaw, self.pitch, self.roll]

    def to_dict(self) -> dict:
        return {
            "position": list(self.position),
            "yaw": self.yaw,
            "pitch": self.pitch,
            "roll": self.roll,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "View":
        x, y, z = (float(v) for v in payload["position"])
        return cls(
            position=(x, y, z),
            yaw=float(payload["yaw"]),
            pitch=float(payload["pitch"]),
            roll=float(payload.get("roll", 0.0)),
        )
