# Schemas module
from app.schemas.dataset import DatasetMetadata, DatasetSummary
from app.schemas.report import CoverageRow, ReconstructionReport, RunReport, TimingRow
from app.schemas.run_config import RunConfig, build_config, load_config
from app.schemas.training import EpochRecord, TrainConfig, TrainingLog

__all__ = [
    "DatasetMetadata",
    "DatasetSummary",
    "ReconstructionReport",
    "RunReport",
    "CoverageRow",
    "TimingRow",
    "RunConfig",
    "build_config",
    "load_config",
    "TrainConfig",
    "EpochRecord",
    "TrainingLog",
]
