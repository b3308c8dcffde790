"""Dataset metadata stored in the header of every dataset file."""

from typing import List, Literal

from pydantic import BaseModel, ConfigDict, Field


class DatasetMetadata(BaseModel):
    model_config = ConfigDict(extra="allow")

    format: str = "nbvlab-dataset"
    sphere_radius: float = Field(default=0.4, gt=0)
    sphere_center: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    candidate_count: int = Field(default=0, ge=0)
    # unit-normalised candidate positions, in candidate order
    candidates: List[List[float]] = Field(default_factory=list)
    overlap_min: float = 0.15
    gain_mode: Literal["visible", "simulated"] = "visible"
    encoding: Literal["probability", "ternary"] = "probability"
    seed: int = 0
    runs_per_object: int = 0
    scans_per_run: int = 0
    objects: List[str] = Field(default_factory=list)
    grid_center: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])
    grid_span: float = 0.0
    camera: dict = Field(default_factory=dict)


class DatasetSummary(BaseModel):
    path: str
    samples: int
    per_object: dict[str, int]
    verified_fraction: float | None = None
