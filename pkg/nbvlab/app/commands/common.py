"""
Builders shared by the CLI commands: scenes, view spheres, networks, planners.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.core import geometry
from app.core.errors import ConfigError
from app.core.seeding import component_seed
from app.models.camera import RangeCamera
from app.models.mesh import Scene, TriangleMesh
from app.models.primitives import make_object
from app.models.view import View
from app.nn.network import NbvNet, build_variant
from app.nn.weights import load_weights
from app.schemas.run_config import RunConfig
from app.services.planner_service import (
    ClassificationPlanner,
    InfoGainPlanner,
    NbvPlanner,
    RegressionPlanner,
    ViewSphere,
    generate_view_sphere,
    initial_view,
)

logger = logging.getLogger(__name__)


@dataclass
class ObjectScene:
    object_id: int
    name: str
    mesh: TriangleMesh
    scene: Scene


def build_scenes(config: RunConfig) -> list[ObjectScene]:
    """One scene per configured object, each centred at the origin over the table."""
    scenes = []
    for object_id, spec in enumerate(config.scene.objects):
        mesh = make_object(spec, config.scene.object_size)
        scene = Scene(meshes=[mesh], table_height=config.scene.table_height(), name=mesh.name)
        scenes.append(ObjectScene(object_id=object_id, name=mesh.name, mesh=mesh, scene=scene))
    return scenes


def candidate_sphere(config: RunConfig) -> ViewSphere:
    sphere = generate_view_sphere(config.sphere.center, config.sphere.radius, config.sphere.count)
    return sphere.above(config.scene.table_height())


def class_sphere(config: RunConfig) -> ViewSphere:
    sphere = generate_view_sphere(config.sphere.center, config.sphere.radius, config.sphere.classification_count)
    return sphere.above(config.scene.table_height())


def class_directions(config: RunConfig) -> np.ndarray:
    return class_sphere(config).unit_positions()


def new_network(config: RunConfig, task: str, output_width: int) -> NbvNet:
    head = "classification" if task == "classification" else "regression"
    return build_variant(
        config.network.variant,
        output_width,
        config.network.dropout_start,
        component_seed(config.seed, f"init:{task}"),
        head=head,
        width_divisor=config.network.width_divisor,
    )


def scale_factor(config: RunConfig, camera: RangeCamera, mesh: TriangleMesh) -> float:
    mode = config.planner.scale_mode
    if mode == "sphere":
        return config.sphere.radius
    if mode == "fov":
        radius = config.sphere.radius
        return geometry.compute_scale_factor(camera.min_half_fov, mesh.major_span, radius) * radius
    return config.planner.k


def _require(path: Optional[str], key: str) -> str:
    if not path:
        raise ConfigError(f"{key} must point at a weight file for this planner", key=key)
    return path


def make_planner(
    name: str,
    config: RunConfig,
    camera: RangeCamera,
    sphere: ViewSphere,
    mesh: TriangleMesh,
    *,
    weights: Optional[str] = None,
) -> NbvPlanner:
    encoding = config.grid.encoding
    if name == "infogain":
        return InfoGainPlanner(sphere, camera, config.planner.overlap_min)
    if name == "classification":
        path = _require(weights or config.network.classification_weights, "network.classification_weights")
        views = class_sphere(config).views
        return ClassificationPlanner(load_weights(config.output_path(path)), views, encoding=encoding)
    if name == "regression":
        path = _require(weights or config.network.weights, "network.weights")
        k = scale_factor(config, camera, mesh)
        return RegressionPlanner(load_weights(config.output_path(path)), k, config.sphere.center, encoding=encoding)
    raise ConfigError(f"Unknown planner {name!r}", key="planner.name")


def first_view(config: RunConfig, sphere: ViewSphere) -> View:
    return initial_view(sphere, config.planner.initial_axis)
