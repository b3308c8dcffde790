from __future__ import annotations

from unittest.mock import Mock

import numpy as np
import pytest

from app.core.errors import DegeneratePosition, EmptyReference, InvalidScale
from app.models.camera import RangeCamera
from app.models.mesh import TriangleMesh
from app.models.point_cloud import PointCloud
from app.models.primitives import box
from app.services import reconstruction_service
from app.nn.weights import load_weights
from app.services.planner_service import (
    InfoGainPlanner,
    NbvPlanner,
    RegressionPlanner,
    generate_view_sphere,
    initial_view,
)
from app.services.reconstruction_service import coverage, matching_distance, reference_cloud_from_mesh


def _brute_force_coverage(accumulated: np.ndarray, reference: np.ndarray, d: float) -> float:
    if len(accumulated) == 0:
        return 0.0
    covered = 0
    for start in range(0, len(reference), 200):
        diff = reference[start : start + 200, None, :] - accumulated[None, :, :]
        nearest = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1)
        covered += int(np.count_nonzero(nearest <= d * d))
    return 100.0 * covered / len(reference)


def _sphere_points(n: int, seed: int) -> np.ndarray:
    v = np.random.default_rng(seed).normal(size=(n, 3))
    return 0.1 * v / np.linalg.norm(v, axis=1, keepdims=True)


def _mock_planner(**kwargs) -> Mock:
    planner = Mock(spec=NbvPlanner, **kwargs)
    planner.name = "mock"
    return planner


def test_identical_clouds_are_fully_covered():
    ref = PointCloud(points=_sphere_points(500, 1))
    assert coverage(ref, ref, 0.001) == 100.0


def test_empty_accumulated_cloud_covers_nothing():
    assert coverage(PointCloud(), PointCloud(points=_sphere_points(10, 1)), 0.005) == 0.0


def test_upper_half_covers_about_half():
    ref = _sphere_points(1000, 2)
    upper = ref[np.argsort(ref[:, 2])[500:]]
    value = coverage(PointCloud(points=upper), PointCloud(points=ref), 0.001)
    assert value == pytest.approx(_brute_force_coverage(upper, ref, 0.001))
    assert 50.0 <= value <= 55.0


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force_on_random_clouds(seed):
    rng = np.random.default_rng(seed)
    ref = rng.uniform(-0.1, 0.1, size=(int(rng.integers(1, 5001)), 3))
    acc = rng.uniform(-0.1, 0.1, size=(int(rng.integers(1, 5001)), 3))
    d = float(rng.choice([0.002, 0.005, 0.01, 0.05]))
    expected = _brute_force_coverage(acc, ref, d)
    assert coverage(PointCloud(points=acc), PointCloud(points=ref), d) == pytest.approx(expected, abs=1e-12)


def test_more_points_never_cover_less():
    ref = PointCloud(points=_sphere_points(400, 3))
    a = PointCloud(points=_sphere_points(150, 4))
    b = PointCloud(points=_sphere_points(150, 5))
    union = a.extended(b)
    assert coverage(union, ref, 0.01) >= max(coverage(a, ref, 0.01), coverage(b, ref, 0.01))


def test_coverage_rejects_bad_inputs():
    cloud = PointCloud(points=_sphere_points(5, 1))
    with pytest.raises(EmptyReference):
        coverage(cloud, PointCloud(), 0.005)
    with pytest.raises(InvalidScale):
        coverage(cloud, cloud, 0.0)


def test_matching_distance_scales_with_object_size():
    assert matching_distance(0.005, 0.2) == pytest.approx(0.005)
    assert matching_distance(0.005, 0.4) == pytest.approx(0.01)


def test_single_triangle_samples_stay_on_its_plane():
    triangle = TriangleMesh(np.array([[0.0, 0.0, 0.3], [1.0, 0.2, 0.5], [0.1, 1.0, -0.2]]), np.array([[0, 1, 2]]))
    points = reference_cloud_from_mesh(triangle, 1000, seed=3).points
    a, b, c = triangle.vertices
    normal = np.cross(b - a, c - a)
    normal /= np.linalg.norm(normal)
    assert np.max(np.abs((points - a) @ normal)) <= 1e-9


def test_cube_faces_are_sampled_by_area():
    points = reference_cloud_from_mesh(box((1.0, 1.0, 1.0)), 6000, seed=11).points
    for axis in range(3):
        for side in (-0.5, 0.5):
            count = int(np.count_nonzero(np.isclose(points[:, axis], side)))
            assert 850 <= count <= 1150


def test_reference_sampling_is_seeded():
    mesh = box((1.0, 0.5, 0.2))
    first = reference_cloud_from_mesh(mesh, 100, seed=4).points
    second = reference_cloud_from_mesh(mesh, 100, seed=4).points
    assert np.array_equal(first, second)


def test_single_scan_makes_no_planning_call(sphere_scene, small_camera):
    sphere = generate_view_sphere((0.0, 0.0, 0.0), 0.4, 20)
    planner = _mock_planner()
    result = reconstruction_service.run(
        sphere_scene, PointCloud(points=_sphere_points(200, 1)), planner, small_camera, initial_view(sphere), 1
    )
    planner.plan.assert_not_called()
    assert len(result.iterations) == 1
    assert result.iterations[0].planning_time is None
    assert result.complete


def test_planner_failure_truncates_the_run(sphere_scene, small_camera):
    sphere = generate_view_sphere((0.0, 0.0, 0.0), 0.4, 20)
    planner = _mock_planner()
    planner.plan.side_effect = DegeneratePosition("predicted the object centre")
    result = reconstruction_service.run(
        sphere_scene, PointCloud(points=_sphere_points(200, 1)), planner, small_camera, initial_view(sphere), 5
    )
    assert not result.complete
    assert result.error == "DEGENERATE_POSITION"
    assert len(result.iterations) == 1
    assert result.iterations[0].planning_time is not None
    assert len(result.cloud) > 0


def test_run_needs_a_reference(sphere_scene, small_camera):
    sphere = generate_view_sphere((0.0, 0.0, 0.0), 0.4, 20)
    with pytest.raises(EmptyReference):
        reconstruction_service.run(sphere_scene, PointCloud(), _mock_planner(), small_camera, initial_view(sphere), 3)


def _infogain_run(scene, scans: int):
    camera = RangeCamera(res_u=16, res_v=16)
    sphere = generate_view_sphere((0.0, 0.0, 0.0), 0.4, 20)
    reference = reference_cloud_from_mesh(scene.meshes[0], 2000, seed=5)
    return reconstruction_service.run(
        scene, reference, InfoGainPlanner(sphere, camera, workers=1), camera, initial_view(sphere), scans, seed=2
    )


def test_coverage_grows_with_infogain_planner(sphere_scene):
    result = _infogain_run(sphere_scene, 4)
    values = [r.coverage for r in result.iterations]
    assert len(values) == 4
    assert all(b > a for a, b in zip(values, values[1:]))
    assert len(result.planning_times) == 3
    assert result.iterations[0].points_added > 0


def test_runs_are_deterministic(sphere_scene):
    first = _infogain_run(sphere_scene, 3)
    second = _infogain_run(sphere_scene, 3)
    assert [r.view for r in first.iterations] == [r.view for r in second.iterations]
    assert [r.coverage for r in first.iterations] == [r.coverage for r in second.iterations]
    assert np.array_equal(first.cloud.points, second.cloud.points)


@pytest.mark.slow
def test_ten_scan_reconstruction(sphere_scene):
    result = _infogain_run(sphere_scene, 10)
    values = [r.coverage for r in result.iterations]
    assert len(values) == 10
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert all(b > a for a, b in zip(values[:4], values[1:4]))


def _sphere_run(scene, planner, camera: RangeCamera, sphere, scans: int = 10):
    reference = reference_cloud_from_mesh(scene.meshes[0], 2000, seed=5)
    return reconstruction_service.run(scene, reference, planner, camera, initial_view(sphere), scans, seed=2)


@pytest.mark.slow
def test_infogain_reaches_ninety_percent_on_the_sphere(sphere_scene):
    camera = RangeCamera(res_u=64, res_v=64)
    sphere = generate_view_sphere((0.0, 0.0, 0.0), 0.4, 20)
    result = _sphere_run(sphere_scene, InfoGainPlanner(sphere, camera), camera, sphere)
    assert result.complete
    assert result.iterations[-1].coverage >= 90.0


@pytest.mark.slow
def test_trained_regression_planner_on_held_out_sphere(sphere_scene, desk_run):
    camera = RangeCamera(res_u=64, res_v=64)
    sphere = generate_view_sphere((0.0, 0.0, 0.0), 0.4, 20)
    planner = RegressionPlanner(load_weights(desk_run / "weights.nbvw"), 0.4)
    result = _sphere_run(sphere_scene, planner, camera, sphere)
    assert result.complete
    values = [r.coverage for r in result.iterations]
    assert values[-1] >= 60.0
    assert values[-1] > values[0]
