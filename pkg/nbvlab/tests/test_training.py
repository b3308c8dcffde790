from __future__ import annotations

import csv

import numpy as np
import pytest

from app.core.errors import EmptyDataset
from app.models.sample import Dataset, Sample
from app.nn.network import build_variant
from app.schemas.training import TrainConfig
from app.services import dataset_service, training_service
from app.services.training_service import class_labels, train, write_log_csv


def _dataset(n: int, seed: int = 0) -> Dataset:
    gen = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        label = gen.normal(size=3)
        samples.append(
            Sample(
                grid_tensor=gen.random((32, 32, 32)),
                nbv_unit_position=label / np.linalg.norm(label),
                object_id=0,
                scan_index=i,
            )
        )
    return Dataset(samples=samples)


def _net(seed: int = 0, output_width: int = 3, head: str = "regression"):
    return build_variant("3-3", output_width, seed=seed, head=head, width_divisor=8)


def test_zero_learning_rate_keeps_everything_constant():
    net = _net()
    before = [p.copy() for p in net.parameters()]
    config = TrainConfig(epochs=3, learning_rate=0.0, batch_size=4, micro_batch=2, seed=1)
    log = train(net, _dataset(6), _dataset(2, seed=9), config)

    assert all(np.array_equal(a, b) for a, b in zip(before, net.parameters()))
    first = log.epochs[0]
    for record in log.epochs[1:]:
        assert record.train_loss == pytest.approx(first.train_loss, rel=1e-12)
        assert record.val_loss == first.val_loss


def test_same_seed_gives_identical_logs():
    config = TrainConfig(epochs=2, learning_rate=1e-3, batch_size=3, micro_batch=2, seed=4)
    first = train(_net(), _dataset(5), _dataset(2, seed=3), config)
    second = train(_net(), _dataset(5), _dataset(2, seed=3), config)
    assert first.model_dump() == second.model_dump()


def test_micro_batches_match_whole_batch_gradient():
    train_set, val_set = _dataset(6), _dataset(2, seed=5)
    whole, split_net = _net(seed=2), _net(seed=2)
    train(whole, train_set, val_set, TrainConfig(epochs=2, learning_rate=1e-3, batch_size=6, micro_batch=6))
    train(split_net, train_set, val_set, TrainConfig(epochs=2, learning_rate=1e-3, batch_size=6, micro_batch=4))
    for a, b in zip(whole.parameters(), split_net.parameters()):
        assert np.allclose(a, b, rtol=1e-9, atol=1e-12)


def test_resumed_step_counter_continues():
    net = _net()
    config = TrainConfig(epochs=2, learning_rate=1e-3, batch_size=2, micro_batch=2)
    train(net, _dataset(4), _dataset(1, seed=2), config)
    assert net.adam_t == 4
    train(net, _dataset(4), _dataset(1, seed=2), config)
    assert net.adam_t == 8


@pytest.mark.slow
def test_overfits_a_single_sample():
    sample = _dataset(1)
    net = _net(seed=3)
    config = TrainConfig(epochs=200, learning_rate=1e-3, batch_size=1, micro_batch=1)
    log = train(net, sample, sample, config)
    assert log.epochs[-1].val_loss < 0.01 * log.epochs[0].train_loss


def test_class_labels_pick_nearest_direction():
    directions = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, -1.0]])
    labels = class_labels(np.array([[0.9, 0.1, 0.0], [0.0, 0.6, 0.8], [0.1, 0.0, -0.99]]), directions)
    assert labels.tolist() == [0, 1, 2]


def test_classification_training_reports_accuracy():
    directions = np.eye(3)
    net = _net(output_width=3, head="classification")
    config = TrainConfig(epochs=1, batch_size=4, micro_batch=2, task="classification")
    log = train(net, _dataset(4), _dataset(2, seed=7), config, class_directions=directions)
    assert log.csv_header() == ["epoch", "train_ce", "val_ce", "val_accuracy"]
    assert 0.0 <= log.epochs[0].val_metric <= 1.0


def test_classification_needs_directions():
    with pytest.raises(EmptyDataset):
        train(_net(), _dataset(2), _dataset(1), TrainConfig(epochs=1, task="classification"))


def test_empty_sets_are_rejected():
    with pytest.raises(EmptyDataset):
        train(_net(), Dataset(), _dataset(1), TrainConfig(epochs=1))
    with pytest.raises(EmptyDataset):
        train(_net(), _dataset(1), Dataset(), TrainConfig(epochs=1))


def test_evaluate_matches_loss_functions():
    data = _dataset(3)
    net = _net()
    loss, metric = training_service.evaluate(net, data.inputs(), data.labels(), "regression")
    out = net.predict(data.inputs())
    assert loss == pytest.approx(float(np.mean((out - data.labels()) ** 2)))
    assert metric == pytest.approx(float(np.mean(np.abs(out - data.labels()))))


def test_log_csv(tmp_path):
    config = TrainConfig(epochs=5, learning_rate=1e-4, batch_size=2, micro_batch=1)
    log = train(_net(), _dataset(3), _dataset(1, seed=1), config)
    path = tmp_path / "training_log.csv"
    write_log_csv(log, path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "train_mse", "val_mse", "val_mae"]
    assert [int(r[0]) for r in rows[1:]] == [1, 2, 3, 4, 5]
    assert float(rows[-1][1]) == log.epochs[-1].train_loss


@pytest.mark.slow
def test_desk_scale_training_learns(desk_run):
    dataset = dataset_service.read_dataset(desk_run / "dataset.nbvd")
    assert len(dataset) >= 300
    assert len(dataset.metadata.objects) == 4
    with open(desk_run / "training_log.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 50
    first, last = float(rows[0]["val_mse"]), float(rows[-1]["val_mse"])
    assert last <= 0.6 * first
    assert float(rows[-1]["val_mae"]) <= 0.35
