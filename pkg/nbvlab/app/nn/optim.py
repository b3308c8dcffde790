"""Adam with bias correction; moment buffers live on the network."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from app.core.errors import ShapeMismatch
from app.nn.network import NbvNet

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


def adam_step(net: NbvNet, gradients: Sequence[np.ndarray], lr: float, t: int) -> NbvNet:
    if t < 1:
        raise ValueError(f"Adam step index must be >= 1, got {t}")
    params = net.parameters()
    if len(gradients) != len(params):
        raise ShapeMismatch(f"Expected {len(params)} gradient arrays, got {len(gradients)}")
    if net.adam_m is None or net.adam_v is None:
        net.adam_m = [np.zeros_like(p) for p in params]
        net.adam_v = [np.zeros_like(p) for p in params]

    bc1 = 1.0 - BETA1**t
    bc2 = 1.0 - BETA2**t
    for p, g, m, v in zip(params, gradients, net.adam_m, net.adam_v):
        m *= BETA1
        m += (1.0 - BETA1) * g
        v *= BETA2
        v += (1.0 - BETA2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + EPSILON)
    net.adam_t = t
    return net
