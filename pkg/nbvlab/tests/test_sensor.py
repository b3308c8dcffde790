from __future__ import annotations

import math

import numpy as np
import pytest

from app.core import geometry
from app.models.camera import RangeCamera
from app.models.mesh import Scene
from app.models.primitives import box
from app.models.view import View
from app.services.sensor_service import SensorService, object_points, render_scan


def _odd_camera(**kwargs) -> RangeCamera:
    # 9x9 so the centre pixel ray is exactly the optical axis
    return RangeCamera(fov_h=math.radians(45.0), fov_v=math.radians(45.0), res_u=9, res_v=9, **kwargs)


def test_camera_looking_away_sees_nothing(sphere_scene):
    view = View(position=(-0.5, 0.0, 0.0), yaw=math.pi, pitch=0.0)
    cloud = render_scan(sphere_scene, view, _odd_camera())
    assert cloud.is_empty


def test_centre_pixel_matches_analytic_sphere(sphere_scene):
    distance = 0.5
    view = View.looking_at((-distance, 0.0, 0.0), (0.0, 0.0, 0.0))
    cloud = render_scan(sphere_scene, view, _odd_camera())
    assert len(cloud) > 0
    off_axis = np.abs(cloud.points[:, 1]) + np.abs(cloud.points[:, 2])
    centre = cloud.points[int(np.argmin(off_axis))]
    assert off_axis.min() < 1e-9
    assert np.linalg.norm(centre - view.origin) == pytest.approx(distance - 0.1, abs=1e-6)


def test_points_lie_on_the_tessellated_sphere(sphere_scene):
    view = View.looking_at((0.3, 0.3, 0.2), (0.0, 0.0, 0.0))
    cloud = render_scan(sphere_scene, view, RangeCamera(res_u=16, res_v=16))
    radii = np.linalg.norm(cloud.points, axis=1)
    # flat facets sit slightly inside the circumscribed sphere
    assert np.all(radii <= 0.1 + 1e-9)
    assert np.all(radii >= 0.099)
    assert np.allclose(cloud.sensor_origin, view.origin)


def test_returned_ranges_respect_camera_limits(sphere_scene):
    camera = RangeCamera(res_u=16, res_v=16, min_range=0.05, max_range=2.0)
    view = View.looking_at((0.0, -0.6, 0.1), (0.0, 0.0, 0.0))
    cloud = render_scan(sphere_scene, view, camera)
    ranges = np.linalg.norm(cloud.points - view.origin, axis=1)
    assert len(cloud) > 0
    assert np.all((ranges >= camera.min_range) & (ranges <= camera.max_range))


def test_surfaces_beyond_max_range_are_dropped(sphere_scene):
    camera = RangeCamera(res_u=16, res_v=16, max_range=0.35)
    view = View.looking_at((-0.5, 0.0, 0.0), (0.0, 0.0, 0.0))
    assert render_scan(sphere_scene, view, camera).is_empty


def test_nearest_surface_occludes_the_rest():
    near = box((0.02, 0.4, 0.4))
    far = box((0.02, 2.0, 2.0)).transformed(translation=(0.3, 0.0, 0.0))
    scene = Scene(meshes=[near, far], name="plates")
    view = View.looking_at((-1.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    cloud = render_scan(scene, view, RangeCamera(res_u=32, res_v=32))

    pts = cloud.points
    on_near = np.isclose(pts[:, 0], -0.01)
    on_far = np.isclose(pts[:, 0], 0.29)
    assert np.all(on_near | on_far)
    assert np.any(on_near) and np.any(on_far)
    behind_near = (np.abs(pts[:, 1]) < 0.19) & (np.abs(pts[:, 2]) < 0.19)
    assert np.all(on_near[behind_near])
    # rays that clear the near plate's rim have spread past it by the far plate
    lateral = np.maximum(np.abs(pts[on_far, 1]), np.abs(pts[on_far, 2]))
    assert np.all(lateral > 0.2)


def test_table_returns_are_removed(sphere_mesh):
    scene = Scene(meshes=[sphere_mesh], table_height=-0.1, name="sphere")
    view = View.looking_at((-0.4, 0.0, 0.3), (0.0, 0.0, 0.0))
    cloud = render_scan(scene, view, RangeCamera(res_u=32, res_v=32))
    assert np.any(cloud.points[:, 2] <= -0.1 + 1e-9)

    kept = object_points(scene, cloud, clearance=0.0125)
    assert len(kept) > 0
    assert np.all(kept.points[:, 2] > -0.1 + 0.0125)


def test_worker_count_does_not_change_the_scan(sphere_scene):
    view = View.looking_at((0.2, -0.3, 0.25), (0.0, 0.0, 0.0))
    camera = RangeCamera(res_u=64, res_v=48)
    serial = render_scan(sphere_scene, view, camera, workers=1)
    parallel = render_scan(sphere_scene, view, camera, workers=4)
    assert np.array_equal(serial.points, parallel.points)


def test_noise_stream_is_seeded(sphere_scene, small_camera):
    view = View.looking_at((-0.5, 0.0, 0.0), (0.0, 0.0, 0.0))
    first = SensorService(sphere_scene, small_camera, noise_std=0.001, seed=5).scan(view)
    second = SensorService(sphere_scene, small_camera, noise_std=0.001, seed=5).scan(view)
    clean = SensorService(sphere_scene, small_camera, seed=5).scan(view)
    assert np.array_equal(first.points, second.points)
    assert not np.array_equal(first.points, clean.points)
    assert len(first) == len(clean)


def test_surfaces_nearer_than_min_range_are_seen_through():
    near = box((0.02, 2.0, 2.0)).transformed(translation=(-0.95, 0.0, 0.0))
    far = box((0.02, 2.0, 2.0))
    scene = Scene(meshes=[near, far], name="plates")
    view = View.looking_at((-1.0, 0.0, 0.0), (0.0, 0.0, 0.0))
    cloud = render_scan(scene, view, _odd_camera(min_range=0.1))
    assert len(cloud) == 81
    assert np.allclose(cloud.points[:, 0], -0.01)


@pytest.mark.parametrize("theta", [0.7, -2.1, math.pi])
def test_rigid_motion_of_scene_and_view_moves_the_scan(theta):
    mesh = box((0.2, 0.1, 0.15))
    view = View.looking_at((0.35, -0.25, 0.1), (0.02, 0.0, -0.01))
    camera = RangeCamera(res_u=24, res_v=24)
    rotation = geometry.rotation_from_tait_bryan(theta, 0.0, 0.0)
    shift = np.array([0.3, -1.2, 0.05])

    moved_view = View(
        position=tuple(rotation @ view.origin + shift),
        yaw=view.yaw + theta,
        pitch=view.pitch,
        roll=view.roll,
    )
    original = render_scan(Scene(meshes=[mesh], name="box"), view, camera)
    moved = render_scan(Scene(meshes=[mesh.transformed(rotation, shift)], name="box"), moved_view, camera)

    assert len(original) > 0
    assert len(moved) == len(original)
    assert np.allclose(moved.points, original.points @ rotation.T + shift, rtol=0.0, atol=1e-9)
    assert np.allclose(moved.sensor_origin, rotation @ original.sensor_origin + shift, rtol=0.0, atol=1e-12)
