"""
Pydantic schemas for reconstruction reports and evaluation tables.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

REPORT_FORMAT = "nbvlab-report"
REPORT_VERSION = 1


class ViewRecord(BaseModel):
    position: List[float]
    yaw: float
    pitch: float
    roll: float = 0.0


class IterationReport(BaseModel):
    index: int
    view: ViewRecord
    points_added: int
    coverage: float
    # wall time of the planning call that followed this scan
    planning_time: Optional[float] = None


class RunReport(BaseModel):
    tag: str
    planner: str
    object: str
    complete: bool = True
    error: Optional[str] = None
    max_scans: int
    final_coverage: float
    total_points: int
    iterations: List[IterationReport] = Field(default_factory=list)

    @property
    def planning_times(self) -> list[float]:
        return [it.planning_time for it in self.iterations if it.planning_time is not None]


class ReconstructionReport(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format: str = REPORT_FORMAT
    version: int = REPORT_VERSION
    seed: int
    object: str
    runs: List[RunReport] = Field(default_factory=list)
    config: dict = Field(default_factory=dict)


class CoverageRow(BaseModel):
    object: str
    planner: str
    scans: int
    final_coverage: float
    complete: bool


class TimingRow(BaseModel):
    planner: str
    calls: int
    mean_planning_time: Optional[float] = None
