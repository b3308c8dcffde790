"""Mini-batch training of NBV-nets with Adam."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from app.core.errors import EmptyDataset, NbvIOError
from app.core.seeding import component_seed
from app.models.sample import Dataset
from app.nn import losses
from app.nn.network import NbvNet
from app.nn.optim import adam_step
from app.schemas.training import EpochRecord, TrainConfig, TrainingLog

logger = logging.getLogger(__name__)


def class_labels(unit_positions: np.ndarray, class_directions: np.ndarray) -> np.ndarray:
    """Index of the class view direction closest to each label direction."""
    dirs = np.asarray(class_directions, dtype=np.float64)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.argmax(np.asarray(unit_positions, dtype=np.float64) @ dirs.T, axis=1)


class _Objective:
    def __init__(self, task: str) -> None:
        self.task = task

    def loss(self, target: np.ndarray, output: np.ndarray) -> tuple[float, np.ndarray]:
        if self.task == "classification":
            return losses.softmax_cross_entropy(target, output)
        return losses.mse_loss(target, output)

    def metric(self, target: np.ndarray, output: np.ndarray) -> float:
        if self.task == "classification":
            return losses.accuracy(target, output)
        return losses.mae(target, output)


def evaluate(net: NbvNet, inputs: np.ndarray, targets: np.ndarray, task: str, batch_size: int = 25) -> tuple[float, float]:
    objective = _Objective(task)
    output = net.predict(inputs, batch_size=batch_size)
    loss, _ = objective.loss(targets, output)
    return loss, objective.metric(targets, output)


def train(
    net: NbvNet,
    train_set: Dataset,
    val_set: Dataset,
    config: TrainConfig,
    *,
    class_directions: Optional[np.ndarray] = None,
) -> TrainingLog:
    """
    Shuffled mini-batch epochs. Every batch is one Adam step; batches are
    processed in micro-batches whose gradients are accumulated.
    """
    if len(train_set) == 0:
        raise EmptyDataset("Training set is empty")
    if len(val_set) == 0:
        raise EmptyDataset("Validation set is empty")
    task = config.task
    if task == "classification" and class_directions is None:
        raise EmptyDataset("Classification training needs the class view directions")

    x_train, x_val = train_set.inputs(), val_set.inputs()
    if task == "classification":
        y_train = class_labels(train_set.labels(), class_directions)
        y_val = class_labels(val_set.labels(), class_directions)
    else:
        y_train, y_val = train_set.labels(), val_set.labels()

    objective = _Objective(task)
    shuffle_rng = np.random.default_rng(component_seed(config.seed, "shuffle"))
    step = net.adam_t
    log = TrainingLog(task=task, descriptor=net.descriptor, train_samples=len(x_train), val_samples=len(x_val))

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(x_train))
        net.train()
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            net.zero_grad()
            batch_loss = 0.0
            for m in range(0, len(batch), config.micro_batch):
                idx = batch[m : m + config.micro_batch]
                weight = len(idx) / len(batch)
                output = net.forward(x_train[idx])
                loss, grad = objective.loss(y_train[idx], output)
                net.backward(grad * weight, accumulate=True)
                batch_loss += loss * weight
            step += 1
            adam_step(net, net.gradients(), config.learning_rate, step)
            epoch_loss += batch_loss * len(batch)
        net.eval()

        val_loss, val_metric = evaluate(net, x_val, y_val, task, config.micro_batch)
        record = EpochRecord(
            epoch=epoch,
            train_loss=epoch_loss / len(x_train),
            val_loss=val_loss,
            val_metric=val_metric,
        )
        log.epochs.append(record)
        logger.info(
            "epoch %d/%d train=%.6f val=%.6f metric=%.6f",
            epoch,
            config.epochs,
            record.train_loss,
            record.val_loss,
            record.val_metric,
        )
    return log


def write_log_csv(log: TrainingLog, path: str | Path) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(log.csv_header())
            for r in log.epochs:
                writer.writerow([r.epoch, *(repr(float(v)) for v in (r.train_loss, r.val_loss, r.val_metric))])
    except OSError as exc:
        raise NbvIOError(f"Cannot write training log {path}: {exc}", path=str(path)) from exc
