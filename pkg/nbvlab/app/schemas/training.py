"""Training configuration and per-epoch log records."""

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=600, ge=1)
    # 0 is allowed and freezes the parameters
    learning_rate: float = Field(default=1e-4, ge=0)
    batch_size: int = Field(default=250, ge=1)
    # samples per forward/backward chunk; gradients accumulate across a batch
    micro_batch: int = Field(default=25, ge=1)
    train_fraction: float = Field(default=0.8, gt=0, lt=1)
    task: Literal["regression", "classification"] = "regression"
    seed: int = 0


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    # MAE for regression, accuracy for classification
    val_metric: float


class TrainingLog(BaseModel):
    task: Literal["regression", "classification"] = "regression"
    descriptor: str = ""
    epochs: List[EpochRecord] = Field(default_factory=list)
    train_samples: int = 0
    val_samples: int = 0
    resumed_from: Optional[str] = None

    def csv_header(self) -> list[str]:
        if self.task == "classification":
            return ["epoch", "train_ce", "val_ce", "val_accuracy"]
        return ["epoch", "train_mse", "val_mse", "val_mae"]
