"""
View and pose algebra.

Conventions: world Z is up, the sensor looks along its local +X axis, and a
pose is R = Rz(yaw) . Ry(pitch) . Rx(roll). Pitch is measured from the
horizontal plane and is positive when the director ray points upwards, so
R(yaw, pitch, 0) applied to +X equals (cos yaw cos pitch, sin yaw cos pitch,
sin pitch).
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from app.core.errors import DegeneratePosition, InvalidGeometry, InvalidScale

# Predicted positions closer than this to the object centre have no defined gaze.
EPS_POSITION = 1e-9

SENSOR_AXIS = np.array([1.0, 0.0, 0.0])


def _rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_pitch(angle: float) -> np.ndarray:
    # +X tilts towards +Z for positive pitch
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def _rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rotation_from_tait_bryan(yaw: float, pitch: float, roll: float) -> np.ndarray:
    """Return the 3x3 sensor rotation for intrinsic yaw-pitch-roll angles."""
    return _rot_z(yaw) @ _rot_pitch(pitch) @ _rot_x(roll)


def director_ray(yaw: float, pitch: float) -> np.ndarray:
    """Unit vector along the optical axis for a roll-free pose."""
    cp = math.cos(pitch)
    return np.array([math.cos(yaw) * cp, math.sin(yaw) * cp, math.sin(pitch)])


def orientation_from_position(
    position: Sequence[float],
    center: Sequence[float],
) -> tuple[float, float, float]:
    """
    Complete a sensor orientation so that it gazes from `position` at `center`.

    Returns (yaw, pitch, roll) with roll fixed to 0. Uses the two-argument
    arctangent so every yaw quadrant is reachable.
    """
    p = np.asarray(position, dtype=np.float64)
    c = np.asarray(center, dtype=np.float64)
    diff = c - p
    norm = float(np.linalg.norm(diff))
    if not norm > EPS_POSITION:
        raise DegeneratePosition(
            f"Sensor position {p.tolist()} coincides with the object centre {c.tolist()}",
            distance=norm,
        )
    ray = diff / norm
    # adding 0.0 folds -0.0 into +0.0 so yaw stays in (-pi, pi]
    yaw = math.atan2(float(ray[1]) + 0.0, float(ray[0]))
    pitch = math.asin(min(1.0, max(-1.0, float(ray[2]))))
    return yaw, pitch, 0.0


def scale_position(position: Sequence[float], k: float) -> np.ndarray:
    """Scale a unit-normalised position by the factor k."""
    if not k > 0:
        raise InvalidScale(f"Scale factor must be positive, got {k}")
    return np.asarray(position, dtype=np.float64) * float(k)


def compute_scale_factor(
    min_fov_half_angle: float,
    object_major_span: float,
    unit_radius: float,
) -> float:
    """
    Multiplier that moves a unit-sphere prediction to the distance at which the
    object's major span just fits the narrowest field-of-view half angle.
    """
    if not 0.0 < min_fov_half_angle < math.pi / 2:
        raise InvalidGeometry(f"FOV half angle must lie in (0, pi/2), got {min_fov_half_angle}")
    if not object_major_span > 0:
        raise InvalidGeometry(f"Object span must be positive, got {object_major_span}")
    if not unit_radius > 0:
        raise InvalidGeometry(f"Unit radius must be positive, got {unit_radius}")
    distance = (object_major_span / 2.0) / math.tan(min_fov_half_angle)
    return distance / unit_radius


def is_rotation(matrix: np.ndarray, tol: float = 1e-9) -> bool:
    m = np.asarray(matrix, dtype=np.float64)
    if m.shape != (3, 3):
        return False
    return bool(
        np.allclose(m.T @ m, np.eye(3), atol=tol) and abs(np.linalg.det(m) - 1.0) <= tol
    )
