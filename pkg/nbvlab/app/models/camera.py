"""Pinhole range camera intrinsics and pixel ray generation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from app.core.errors import InvalidGeometry
from app.models.view import View


@dataclass(frozen=True)
class RangeCamera:
    fov_h: float = math.radians(45.0)
    fov_v: float = math.radians(45.0)
    res_u: int = 64
    res_v: int = 64
    min_range: float = 0.1
    max_range: float = 10.0

    def __post_init__(self) -> None:
        for name in ("fov_h", "fov_v"):
            value = getattr(self, name)
            if not 0.0 < value < math.pi:
                raise InvalidGeometry(f"Camera {name} must lie in (0, pi), got {value}")
        if self.res_u < 1 or self.res_v < 1:
            raise InvalidGeometry(f"Camera resolution must be at least 1x1, got {self.res_u}x{self.res_v}")
        if not 0.0 <= self.min_range < self.max_range:
            raise InvalidGeometry(
                f"Camera range needs 0 <= min < max, got [{self.min_range}, {self.max_range}]"
            )

    @property
    def pixel_count(self) -> int:
        return self.res_u * self.res_v

    @property
    def min_half_fov(self) -> float:
        return min(self.fov_h, self.fov_v) / 2.0

    @cached_property
    def sensor_directions(self) -> np.ndarray:
        """
        Unit pixel rays in the sensor frame, row-major over (v, u).

        The optical axis is +X; image u grows towards sensor -Y and v towards -Z.
        """
        u = (np.arange(self.res_u) + 0.5) / self.res_u * 2.0 - 1.0
        v = (np.arange(self.res_v) + 0.5) / self.res_v * 2.0 - 1.0
        x_ndc = u * math.tan(self.fov_h / 2.0)
        y_ndc = v * math.tan(self.fov_v / 2.0)
        yy, xx = np.meshgrid(y_ndc, x_ndc, indexing="ij")
        dirs = np.stack([np.ones_like(xx), -xx, -yy], axis=-1).reshape(-1, 3)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs.setflags(write=False)
        return dirs

    def world_rays(self, view: View) -> tuple[np.ndarray, np.ndarray]:
        """(origin (3,), directions (res_v*res_u, 3)) for a pose."""
        directions = self.sensor_directions @ view.rotation().T
        return view.origin, directions
