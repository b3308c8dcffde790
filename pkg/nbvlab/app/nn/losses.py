"""Training losses and evaluation metrics. Each loss returns (value, dLoss/dPrediction)."""

from __future__ import annotations

import numpy as np

from app.core.errors import ShapeMismatch


def _check_pair(target: np.ndarray, prediction: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    target = np.asarray(target, dtype=np.float64)
    prediction = np.asarray(prediction, dtype=np.float64)
    if target.shape != prediction.shape:
        raise ShapeMismatch(f"Target shape {target.shape} does not match prediction shape {prediction.shape}")
    return target, prediction


def mse_loss(target: np.ndarray, prediction: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over components, then over the batch."""
    target, prediction = _check_pair(target, prediction)
    diff = prediction - target
    if diff.size == 0:
        return 0.0, diff
    return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def mae(target: np.ndarray, prediction: np.ndarray) -> float:
    target, prediction = _check_pair(target, prediction)
    if target.size == 0:
        return 0.0
    return float(np.mean(np.abs(prediction - target)))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(labels: np.ndarray, logits: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy of integer class labels against raw logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeMismatch(f"Logits {logits.shape} do not match {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ShapeMismatch(f"Class labels must lie in [0, {logits.shape[1]})")
    n = logits.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(logits)
    probs = softmax(logits)
    rows = np.arange(n)
    loss = float(-np.mean(np.log(np.clip(probs[rows, labels], 1e-300, None))))
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    return loss, grad / n


def accuracy(labels: np.ndarray, logits: np.ndarray) -> float:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if labels.size == 0:
        return 0.0
    return float(np.mean(np.argmax(logits, axis=1) == labels))
