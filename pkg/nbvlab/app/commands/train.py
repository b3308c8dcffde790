"""
`train`: fit an NBV-net on a dataset file; writes weights plus a per-epoch CSV log.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from app.commands.common import class_directions, new_network
from app.core.seeding import component_seed
from app.nn.weights import load_weights, save_weights
from app.schemas.run_config import RunConfig
from app.schemas.training import TrainingLog
from app.services import dataset_service, training_service

logger = logging.getLogger(__name__)

WEIGHT_FILES = {"regression": "weights.nbvw", "classification": "classification.nbvw"}
LOG_FILES = {"regression": "training_log.csv", "classification": "classification_log.csv"}


@dataclass
class TrainResult:
    log: TrainingLog
    weights_path: Path
    log_path: Path


def run(config: RunConfig) -> TrainResult:
    task = config.training.task
    dataset = dataset_service.read_dataset(config.output_path(config.dataset.path))
    train_set, val_set = dataset_service.split(
        dataset, config.training.train_fraction, component_seed(config.seed, "split")
    )
    logger.info("Training %s on %d samples, validating on %d", task, len(train_set), len(val_set))

    directions = None
    if task == "classification":
        directions = class_directions(config)
        net = new_network(config, task, len(directions))
    else:
        net = new_network(config, task, 3)

    resumed_from = None
    if config.network.resume:
        resumed_from = str(config.output_path(config.network.resume))
        load_weights(resumed_from, net)

    log = training_service.train(net, train_set, val_set, config.training, class_directions=directions)
    log.resumed_from = resumed_from

    weights_path = config.output_path(WEIGHT_FILES[task])
    log_path = config.output_path(LOG_FILES[task])
    save_weights(net, weights_path)
    training_service.write_log_csv(log, log_path)
    return TrainResult(log=log, weights_path=weights_path, log_path=log_path)
