"""
Experiment configuration.

Config files are JSON objects with flat dotted keys (`"camera.res_u": 64`);
nested objects are accepted too. Every section rejects unknown keys.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, List, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from app.core.architectures import DropoutStart, normalize_variant
from app.core.config import settings
from app.core.errors import ConfigError, NbvIOError, UnknownVariant
from app.models.camera import RangeCamera
from app.schemas.training import TrainConfig


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", use_enum_values=True)


class SceneConfig(_Section):
    # primitive:<name>, a bare primitive name, or mesh:<path>
    objects: List[str] = Field(default_factory=lambda: ["sphere"], min_length=1)
    object_size: float = Field(default=0.2, gt=0)
    # table plane just under the object's bounding box
    table: bool = True

    def table_height(self) -> Optional[float]:
        return -self.object_size / 2.0 if self.table else None


class CameraConfig(_Section):
    fov_h_deg: float = Field(default=45.0, gt=0, lt=180)
    fov_v_deg: float = Field(default=45.0, gt=0, lt=180)
    res_u: int = Field(default=64, ge=1)
    res_v: int = Field(default=64, ge=1)
    min_range: float = Field(default=0.1, ge=0)
    max_range: float = Field(default=10.0, gt=0)
    noise_std: float = Field(default=0.0, ge=0)

    def build(self) -> RangeCamera:
        return RangeCamera(
            fov_h=math.radians(self.fov_h_deg),
            fov_v=math.radians(self.fov_v_deg),
            res_u=self.res_u,
            res_v=self.res_v,
            min_range=self.min_range,
            max_range=self.max_range,
        )


class GridConfig(_Section):
    dims: int = Field(default=32, ge=1)
    span: float = Field(default=0.4, gt=0)
    encoding: Literal["probability", "ternary"] = "probability"


class SphereConfig(_Section):
    radius: float = Field(default=0.4, gt=0)
    count: int = Field(default=20, ge=1)
    classification_count: int = Field(default=14, ge=1)
    center: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0], min_length=3, max_length=3)


class PlannerConfig(_Section):
    name: Literal["infogain", "regression", "classification"] = "infogain"
    overlap_min: float = Field(default=0.15, ge=0, le=1)
    scale_mode: Literal["sphere", "fov", "fixed"] = "sphere"
    k: float = Field(default=2.5, gt=0)
    initial_axis: List[float] = Field(default_factory=lambda: [0.0, -1.0, 0.0], min_length=3, max_length=3)


class NetworkConfig(_Section):
    variant: str = "4-5"
    dropout_start: DropoutStart = DropoutStart.NONE
    width_divisor: int = Field(default=1, ge=1)
    # regression weights used by the regression planner
    weights: Optional[str] = None
    classification_weights: Optional[str] = None
    # extra regression weight files compared by `reconstruct --compare`
    compare_weights: List[str] = Field(default_factory=list)
    # continue training from these weights
    resume: Optional[str] = None

    @field_validator("variant")
    @classmethod
    def check_variant(cls, value: str) -> str:
        try:
            return normalize_variant(value)
        except UnknownVariant as exc:
            raise ValueError(str(exc)) from exc


class DatasetConfig(_Section):
    runs_per_object: int = Field(default=10, ge=1)
    scans_per_run: int = Field(default=6, ge=2)
    gain_mode: Literal["visible", "simulated"] = "visible"
    path: str = "dataset.nbvd"
    verify: bool = False
    # re-score an existing dataset file instead of generating one
    verify_only: bool = False


class ReconstructionConfig(_Section):
    max_scans: int = Field(default=10, ge=1)
    # meters, for an object of size 0.2 m; scaled with scene.object_size
    coverage_distance: float = Field(default=0.005, gt=0)
    reference_points: int = Field(default=5000, ge=1)
    compare: bool = False


class EvalConfig(_Section):
    # glob patterns, relative to output_dir unless absolute
    reports: List[str] = Field(default_factory=lambda: ["report*.json"])


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default_factory=lambda: settings.NBV_DEFAULT_SEED)
    output_dir: str = Field(default_factory=lambda: settings.NBV_OUTPUT_DIR)
    scene: SceneConfig = Field(default_factory=SceneConfig)
    camera: CameraConfig = Field(default_factory=CameraConfig)
    grid: GridConfig = Field(default_factory=GridConfig)
    sphere: SphereConfig = Field(default_factory=SphereConfig)
    planner: PlannerConfig = Field(default_factory=PlannerConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    training: TrainConfig = Field(default_factory=TrainConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    reconstruction: ReconstructionConfig = Field(default_factory=ReconstructionConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)

    @model_validator(mode="after")
    def check_ranges(self) -> "RunConfig":
        if self.camera.min_range >= self.camera.max_range:
            raise ValueError("camera.min_range must be below camera.max_range")
        if "seed" not in self.training.model_fields_set:
            self.training.seed = self.seed
        return self

    def grid_dims(self) -> tuple[int, int, int]:
        return (self.grid.dims, self.grid.dims, self.grid.dims)

    def output_path(self, name: str) -> Path:
        p = Path(name)
        return p if p.is_absolute() else Path(self.output_dir) / p


def unflatten(values: Mapping[str, Any]) -> dict:
    """{"a.b": 1, "c": 2} -> {"a": {"b": 1}, "c": 2}; nested dicts merge."""
    tree: dict = {}
    for key, value in values.items():
        parts = key.split(".")
        node = tree
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Config key {key!r} conflicts with a scalar {part!r}", key=key)
            node = child
        leaf = parts[-1]
        if isinstance(value, Mapping):
            existing = node.setdefault(leaf, {})
            if not isinstance(existing, dict):
                raise ConfigError(f"Config key {key!r} conflicts with a scalar value", key=key)
            existing.update(unflatten(value))
        else:
            node[leaf] = value
    return tree


def _merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _describe(exc: ValidationError) -> tuple[str, str]:
    first = exc.errors()[0]
    key = ".".join(str(p) for p in first.get("loc", ()))
    if first.get("type") == "extra_forbidden":
        return key, f"unknown config key {key!r}"
    return key, f"invalid value for {key!r}: {first.get('msg')}"


def build_config(values: Mapping[str, Any], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Validate file values plus flag overrides (both flat-dotted) into a RunConfig."""
    tree = _merge(unflatten(values), unflatten(overrides or {}))
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as exc:
        key, message = _describe(exc)
        raise ConfigError(message, key=key) from exc


def load_config(path: Optional[str | Path], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    values: dict = {}
    if path is not None:
        p = Path(path)
        try:
            raw = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise NbvIOError(f"Cannot read config {p}: {exc}", path=str(p)) from exc
        try:
            values = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"Config {p} is not valid JSON: {exc}", path=str(p)) from exc
        if not isinstance(values, dict):
            raise ConfigError(f"Config {p} must hold a JSON object", path=str(p))
    return build_config(values, overrides)


def dump_config(config: RunConfig) -> dict:
    """Flat dotted view of a resolved config, as written next to command outputs."""
    flat: dict = {}

    def walk(prefix: str, node: Any) -> None:
        if isinstance(node, dict):
            for key, value in node.items():
                walk(f"{prefix}.{key}" if prefix else key, value)
        else:
            flat[prefix] = node

    walk("", config.model_dump(mode="json"))
    return flat
