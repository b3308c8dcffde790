from __future__ import annotations

import math

import numpy as np
import pytest

from app.core.errors import IndexOutOfBounds, InvalidDims, WrongDims
from app.models.occupancy_grid import (
    L_HIT,
    L_MAX,
    L_MISS,
    STATE_FREE,
    STATE_OCCUPIED,
    STATE_UNKNOWN,
    OccupancyGrid,
    VoxelState,
)
from app.models.point_cloud import PointCloud


def _unit_grid(n: int = 8) -> OccupancyGrid:
    """n^3 grid of 1 m voxels with its corner at the world origin."""
    return OccupancyGrid.new((n / 2.0, n / 2.0, n / 2.0), float(n), (n, n, n))


def _single_ray() -> PointCloud:
    # crosses voxels x = 0..4 and ends inside x = 4
    return PointCloud(points=[[4.5, 0.5, 0.5]], sensor_origin=[0.5, 0.5, 0.5])


def test_new_grid_geometry():
    grid = OccupancyGrid.new((0.0, 0.0, 0.0), 0.96, (32, 32, 32))
    assert grid.voxel_size == pytest.approx(0.03)
    assert np.allclose(grid.origin, [-0.48, -0.48, -0.48])
    assert np.all(grid.state_codes() == STATE_UNKNOWN)


def test_single_voxel_grid():
    grid = OccupancyGrid.new((0.0, 0.0, 0.0), 0.1, (1, 1, 1))
    assert grid.voxel_state((0, 0, 0)) == VoxelState.UNKNOWN


@pytest.mark.parametrize(
    "span,dims",
    [(0.0, (32, 32, 32)), (-1.0, (8, 8, 8)), (0.4, (0, 4, 4)), (0.4, (8, 8, 4))],
)
def test_new_grid_rejects_bad_dims(span, dims):
    with pytest.raises(InvalidDims):
        OccupancyGrid.new((0.0, 0.0, 0.0), span, dims)


def test_voxel_state_out_of_bounds(grid32):
    with pytest.raises(IndexOutOfBounds):
        grid32.voxel_state((32, 0, 0))
    with pytest.raises(IndexOutOfBounds):
        grid32.voxel_state((0, -1, 0))


def test_empty_cloud_leaves_grid_unchanged(grid32):
    before = grid32.log_odds.copy()
    grid32.integrate_scan(PointCloud())
    assert np.array_equal(grid32.log_odds, before)


def test_single_ray_hit_and_misses():
    grid = _unit_grid()
    grid.integrate_scan(_single_ray())
    for x in range(4):
        assert grid.log_odds[x, 0, 0] == pytest.approx(L_MISS)
        assert grid.voxel_state((x, 0, 0)) == VoxelState.FREE
    assert grid.log_odds[4, 0, 0] == pytest.approx(math.log(0.7 / 0.3))
    assert grid.voxel_state((4, 0, 0)) == VoxelState.OCCUPIED
    # nothing beyond the endpoint or off the ray is touched
    assert grid.log_odds[5, 0, 0] == 0.0
    assert np.count_nonzero(grid.log_odds) == 5


def test_log_odds_match_scalar_bayes_filter():
    grid = _unit_grid()
    for _ in range(3):
        grid.integrate_scan(_single_ray())
    p = 0.5
    for _ in range(3):
        p = 0.7 * p / (0.7 * p + 0.3 * (1.0 - p))
    assert grid.probabilities()[4, 0, 0] == pytest.approx(p)


def test_repeated_hits_saturate_at_upper_clamp():
    grid = _unit_grid()
    for _ in range(50):
        grid.integrate_scan(_single_ray())
    assert grid.log_odds[4, 0, 0] == pytest.approx(L_MAX)
    assert grid.log_odds.max() <= L_MAX
    assert grid.probabilities()[4, 0, 0] == pytest.approx(0.97)


def test_voxel_counted_once_per_scan():
    grid = _unit_grid()
    # two returns in the same voxel and two rays sharing the miss voxels
    cloud = PointCloud(points=[[4.5, 0.5, 0.5], [4.6, 0.4, 0.6]], sensor_origin=[0.5, 0.5, 0.5])
    grid.integrate_scan(cloud)
    assert grid.log_odds[4, 0, 0] == pytest.approx(L_HIT)
    assert grid.log_odds[1, 0, 0] == pytest.approx(L_MISS)


def test_max_range_turns_far_returns_into_misses():
    grid = _unit_grid()
    grid.integrate_scan(_single_ray(), max_range=2.2)
    assert grid.voxel_state((4, 0, 0)) == VoxelState.UNKNOWN
    assert grid.voxel_state((2, 0, 0)) == VoxelState.FREE


def test_raycast_all_unknown_hits_entry_face(grid32):
    hit = grid32.raycast((-1.0, 0.001, 0.002), (1.0, 0.0, 0.0), 10.0)
    assert hit == ((0, 16, 16), VoxelState.UNKNOWN)


def test_raycast_miss_returns_none(grid32):
    assert grid32.raycast((-1.0, 1.0, 0.0), (1.0, 0.0, 0.0), 10.0) is None
    assert grid32.raycast((-1.0, 0.0, 0.0), (-1.0, 0.0, 0.0), 10.0) is None


def test_raycast_skips_free_voxels():
    grid = _unit_grid()
    grid.log_odds[0:3, 2, 2] = L_MISS
    grid.log_odds[3, 2, 2] = L_HIT
    hit = grid.raycast((-0.5, 2.5, 2.5), (1.0, 0.0, 0.0), 20.0)
    assert hit == ((3, 2, 2), VoxelState.OCCUPIED)


def test_raycast_free_path_within_range_returns_none():
    grid = _unit_grid()
    grid.log_odds[:, 2, 2] = L_MISS
    assert grid.raycast((-0.5, 2.5, 2.5), (1.0, 0.0, 0.0), 20.0) is None


@pytest.mark.filterwarnings("error")
def test_rays_missing_the_grid_raise_no_warnings(grid32):
    origins = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.5, 0.0], [1.0, 1.0, 1.0]])
    directions = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 1.0]])
    cells, states = grid32.raycast_many(origins, directions, 10.0)
    assert np.all(states == -1)
    assert np.all(cells == -1)
    trace = grid32.trace_many(origins, directions, 10.0)
    assert trace.unknown.size == 0
    assert np.all(trace.surface == -1)

def _random_carved_grid(seed: int, n: int = 12) -> OccupancyGrid:
    rng = np.random.default_rng(seed)
    grid = OccupancyGrid.new((0.0, 0.0, 0.0), 0.4, (n, n, n))
    choice = rng.choice(3, size=grid.dims, p=[0.2, 0.7, 0.1])
    grid.log_odds[choice == 1] = L_MISS
    grid.log_odds[choice == 2] = L_HIT
    return grid


def _random_rays(rng, count: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    targets = rng.uniform(-0.15, 0.15, size=(count, 3))
    starts = rng.normal(size=(count, 3))
    starts = 0.5 * starts / np.linalg.norm(starts, axis=1, keepdims=True)
    directions = targets - starts
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return starts, directions, rng.uniform(0.3, 1.2, size=count)


@pytest.mark.parametrize("seed", range(20))
def test_raycast_agrees_with_slab_oracle(seed, slab_raycast):
    grid = _random_carved_grid(seed)
    rng = np.random.default_rng(1000 + seed)
    starts, directions, ranges = _random_rays(rng, 1000)

    for i in range(len(starts)):
        cells, states = grid.raycast_many(starts[i : i + 1], directions[i : i + 1], float(ranges[i]))
        expected = slab_raycast(grid, starts[i], directions[i], float(ranges[i]))
        if expected is None:
            assert states[0] == -1
        else:
            assert tuple(int(v) for v in cells[0]) == expected[0]
            assert int(states[0]) == expected[1]


def test_batched_raycast_matches_single_rays():
    grid = _random_carved_grid(99)
    starts, directions, _ = _random_rays(np.random.default_rng(5), 200)
    cells, states = grid.raycast_many(starts, directions, 0.8)
    for i in range(len(starts)):
        one_cells, one_states = grid.raycast_many(starts[i : i + 1], directions[i : i + 1], 0.8)
        assert np.array_equal(cells[i], one_cells[0])
        assert states[i] == one_states[0]


@pytest.mark.parametrize("seed", range(3))
def test_trace_agrees_with_slab_oracle(seed, slab_cells):
    grid = _random_carved_grid(seed)
    starts, directions, _ = _random_rays(np.random.default_rng(2000 + seed), 200)
    trace = grid.trace_many(starts, directions, 1.0)

    expected_unknown = []
    for i in range(len(starts)):
        surface, first_unknown = -1, -1
        for cell, code in slab_cells(grid, starts[i], directions[i], 1.0):
            linear = int(np.ravel_multi_index(cell, grid.dims))
            if code == STATE_UNKNOWN:
                expected_unknown.append(linear)
                if first_unknown == -1:
                    first_unknown = linear
            elif code == STATE_OCCUPIED:
                surface = linear
                break
        assert trace.surface[i] == surface
        assert trace.first_unknown[i] == first_unknown
    assert sorted(trace.unknown.tolist()) == sorted(expected_unknown)


def test_trace_sees_through_unknown_to_the_surface():
    grid = _unit_grid()
    grid.log_odds[5, 2, 2] = L_HIT
    trace = grid.trace_many((-0.5, 2.5, 2.5), (1.0, 0.0, 0.0), 20.0)
    assert trace.surface[0] == np.ravel_multi_index((5, 2, 2), grid.dims)
    assert trace.first_unknown[0] == np.ravel_multi_index((0, 2, 2), grid.dims)
    assert sorted(trace.unknown.tolist()) == [int(np.ravel_multi_index((x, 2, 2), grid.dims)) for x in range(5)]


def test_hit_and_miss_updates_commute():
    hit_first = _unit_grid()
    miss_first = _unit_grid()
    # ends inside x = 4, then passes through x = 4 and ends inside x = 6
    short = _single_ray()
    long = PointCloud(points=[[6.5, 0.5, 0.5]], sensor_origin=[0.5, 0.5, 0.5])
    hit_first.integrate_scan(short).integrate_scan(long)
    miss_first.integrate_scan(long).integrate_scan(short)
    assert np.allclose(hit_first.log_odds, miss_first.log_odds, rtol=0.0, atol=1e-12)
    assert hit_first.log_odds[4, 0, 0] == pytest.approx(L_HIT + L_MISS)


def test_input_tensor_of_fresh_grid(grid32):
    tensor = grid32.to_input_tensor()
    assert tensor.shape == (32, 32, 32)
    assert np.all(tensor == 0.5)


def test_input_tensor_after_single_hit():
    grid = OccupancyGrid.new((16.0, 16.0, 16.0), 32.0, (32, 32, 32))
    grid.integrate_scan(_single_ray())
    tensor = grid.to_input_tensor()
    assert tensor[4, 0, 0] == pytest.approx(0.7)
    assert np.all((tensor > 0.0) & (tensor < 1.0))


def test_ternary_encoding():
    grid = OccupancyGrid.new((16.0, 16.0, 16.0), 32.0, (32, 32, 32))
    grid.integrate_scan(_single_ray())
    tensor = grid.to_input_tensor("ternary")
    assert tensor[4, 0, 0] == 1.0
    assert tensor[0, 0, 0] == 0.0
    assert tensor[10, 10, 10] == 0.5


def test_input_tensor_requires_network_dims():
    with pytest.raises(WrongDims):
        _unit_grid(16).to_input_tensor()


def test_state_codes_follow_threshold():
    grid = _unit_grid(2)
    grid.log_odds[0, 0, 0] = L_HIT
    grid.log_odds[1, 0, 0] = L_MISS
    # 0.52 sits inside the unknown band around 0.5
    grid.log_odds[0, 1, 0] = math.log(0.52 / 0.48)
    codes = grid.state_codes()
    assert codes[0, 0, 0] == STATE_OCCUPIED
    assert codes[1, 0, 0] == STATE_FREE
    assert codes[0, 1, 0] == STATE_UNKNOWN


def test_text_export(tmp_path):
    grid = _unit_grid()
    grid.integrate_scan(_single_ray())
    path = tmp_path / "grid.txt"
    grid.write_text(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("dims 8 8 8 voxel_size 1")
    assert len(lines) == 1 + 5
