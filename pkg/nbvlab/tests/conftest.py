import math
import os

import numpy as np
import pytest


@pytest.fixture()
def small_camera():
    """8x8 pixel camera with the default 45 degree field of view."""
    from app.models.camera import RangeCamera

    return RangeCamera(fov_h=math.radians(45.0), fov_v=math.radians(45.0), res_u=8, res_v=8)


@pytest.fixture()
def sphere_mesh():
    from app.models.primitives import make_object

    return make_object("sphere", 0.2)


@pytest.fixture()
def sphere_scene(sphere_mesh):
    from app.models.mesh import Scene

    return Scene(meshes=[sphere_mesh], table_height=None, name="sphere")


@pytest.fixture()
def grid32():
    from app.models.occupancy_grid import OccupancyGrid

    return OccupancyGrid.new((0.0, 0.0, 0.0), 0.4, (32, 32, 32))


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def settings_override():
    """
    Temporarily set attributes on the shared settings object; values are
    restored after the test.
    """
    from app.core.config import settings

    saved = {}

    def apply(**values):
        for key, value in values.items():
            if key not in saved:
                saved[key] = getattr(settings, key)
            setattr(settings, key, value)
        return settings

    yield apply

    for key, value in saved.items():
        setattr(settings, key, value)


@pytest.fixture()
def output_dir(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    old_cwd = os.getcwd()
    yield out
    os.chdir(old_cwd)


def _cells_by_slabs(grid, origin, direction, max_range):
    """Every voxel the ray crosses within range, nearest first, as ((i, j, k), state code)."""
    codes = grid.state_codes()
    idx = np.argwhere(np.ones(grid.dims, dtype=bool))
    lo = grid.origin + idx * grid.voxel_size
    hi = lo + grid.voxel_size
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (lo - o) / d
        t1 = (hi - o) / d
    near = np.max(np.where(d == 0, -np.inf, np.minimum(t0, t1)), axis=1)
    far = np.min(np.where(d == 0, np.inf, np.maximum(t0, t1)), axis=1)
    # axis-parallel components must already lie inside the slab
    inside = np.all((d != 0) | ((o >= lo) & (o < hi)), axis=1)
    crossed = inside & (near < far) & (far > 0.0) & (np.maximum(near, 0.0) <= max_range)
    order = np.argsort(np.maximum(near[crossed], 0.0), kind="stable")
    return [((int(i), int(j), int(k)), int(codes[i, j, k])) for i, j, k in idx[crossed][order]]


def _first_non_free_by_slabs(grid, origin, direction, max_range):
    """First non-Free voxel found by intersecting the ray with every voxel box."""
    from app.models.occupancy_grid import STATE_FREE

    for cell, code in _cells_by_slabs(grid, origin, direction, max_range):
        if code != STATE_FREE:
            return cell, code
    return None


@pytest.fixture()
def slab_raycast():
    """Brute-force raycast oracle: ((i, j, k), state code) or None."""
    return _first_non_free_by_slabs


@pytest.fixture()
def slab_cells():
    """Brute-force traversal oracle: ordered ((i, j, k), state code) pairs."""
    return _cells_by_slabs


DESK_RUN = {
    "seed": 7,
    "scene.objects": ["box", "cylinder", "cone", "torus"],
    "scene.table": False,
    "camera.res_u": 32,
    "camera.res_v": 32,
    "sphere.count": 20,
    "dataset.runs_per_object": 15,
    "dataset.scans_per_run": 6,
    "network.variant": "3-3",
    "training.epochs": 50,
    "training.learning_rate": 1e-4,
    "training.batch_size": 25,
    "training.micro_batch": 25,
}


@pytest.fixture(scope="session")
def desk_run(tmp_path_factory):
    """
    Output directory of a desk-scale run: 300 samples over four primitives and
    a 3-3 regression net trained on them for 50 epochs.
    """
    import json

    from app.main import main

    root = tmp_path_factory.mktemp("desk")
    config = root / "desk.json"
    config.write_text(json.dumps(DESK_RUN), encoding="utf-8")
    out = root / "run"
    out.mkdir()
    for command in ("gen-dataset", "train"):
        assert main([command, "--config", str(config), "--output-dir", str(out)]) == 0
    return out
