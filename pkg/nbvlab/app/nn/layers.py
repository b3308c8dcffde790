"""
Layer implementations with explicit forward/backward passes (float64).

Each layer caches what its backward pass needs during forward. Parameter
gradients accumulate into `grads` so one optimiser step can span several
micro-batches; callers reset them with `zero_grad()`.
"""

from __future__ import annotations

import math

import numpy as np

from app.core.architectures import (
    Conv3dSpec,
    DropoutSpec,
    FlattenSpec,
    FullyConnectedSpec,
    LayerSpec,
    MaxPool3dSpec,
    ReLUSpec,
    TanhSpec,
)
from app.core.errors import ShapeMismatch, StaleCache


class Layer:
    spec: LayerSpec

    def __init__(self) -> None:
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def zero_grad(self) -> None:
        for name, value in self.params.items():
            self.grads[name] = np.zeros_like(value)

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise StaleCache(f"{type(self).__name__}.backward called without a preceding forward pass")
        cache, self._cache = self._cache, None
        return cache


def _fan_in_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv3d(Layer):
    """Cross-correlation over (B, C, D, H, W) with cubic kernels."""

    def __init__(self, in_channels: int, spec: Conv3dSpec, rng: np.random.Generator) -> None:
        super().__init__()
        self.spec = spec
        k = spec.kernel
        self.params["weight"] = _fan_in_uniform(rng, (spec.filters, in_channels, k, k, k), in_channels * k**3)
        self.params["bias"] = np.zeros(spec.filters)
        self.zero_grad()

    def _out_dims(self, dims: tuple[int, ...]) -> tuple[int, int, int]:
        s, p, k = self.spec.stride, self.spec.padding, self.spec.kernel
        return tuple((d + 2 * p - k) // s + 1 for d in dims)  # type: ignore[return-value]

    def _window(self, xp: np.ndarray, a: int, b: int, c: int, out: tuple[int, int, int]) -> np.ndarray:
        s = self.spec.stride
        do, ho, wo = out
        return xp[:, :, a : a + s * do : s, b : b + s * ho : s, c : c + s * wo : s]

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        w = self.params["weight"]
        if x.ndim != 5 or x.shape[1] != w.shape[1]:
            raise ShapeMismatch(f"Conv3d expects (B, {w.shape[1]}, D, H, W), got {x.shape}")
        p, k = self.spec.padding, self.spec.kernel
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p), (p, p))) if p else x
        out_dims = self._out_dims(x.shape[2:])
        # channels-last accumulator: (B, D, H, W, F)
        acc = np.zeros((x.shape[0], *out_dims, w.shape[0]))
        for a in range(k):
            for b in range(k):
                for c in range(k):
                    acc += np.tensordot(self._window(xp, a, b, c, out_dims), w[:, :, a, b, c], axes=([1], [1]))
        acc += self.params["bias"]
        self._cache = (xp, x.shape, out_dims)
        return np.ascontiguousarray(acc.transpose(0, 4, 1, 2, 3))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        xp, x_shape, out_dims = self._take_cache()
        w = self.params["weight"]
        p, k, s = self.spec.padding, self.spec.kernel, self.spec.stride
        g = grad.transpose(0, 2, 3, 4, 1)
        self.grads["bias"] += g.sum(axis=(0, 1, 2, 3))
        dxp = np.zeros_like(xp)
        do, ho, wo = out_dims
        for a in range(k):
            for b in range(k):
                for c in range(k):
                    window = self._window(xp, a, b, c, out_dims)
                    self.grads["weight"][:, :, a, b, c] += np.tensordot(
                        g, window, axes=([0, 1, 2, 3], [0, 2, 3, 4])
                    )
                    dxp[:, :, a : a + s * do : s, b : b + s * ho : s, c : c + s * wo : s] += np.tensordot(
                        g, w[:, :, a, b, c], axes=([4], [0])
                    ).transpose(0, 4, 1, 2, 3)
        if p:
            return dxp[:, :, p:-p, p:-p, p:-p]
        return dxp


class MaxPool3d(Layer):
    """Non-overlapping max pooling (kernel = stride); trailing odd cells are dropped."""

    def __init__(self, spec: MaxPool3dSpec) -> None:
        super().__init__()
        self.spec = spec

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        s = self.spec.stride
        b, ch, d, h, w = x.shape
        od, oh, ow = d // s, h // s, w // s
        cropped = x[:, :, : od * s, : oh * s, : ow * s]
        blocks = cropped.reshape(b, ch, od, s, oh, s, ow, s).transpose(0, 1, 2, 4, 6, 3, 5, 7)
        flat = blocks.reshape(b, ch, od, oh, ow, s**3)
        # argmax returns the first maximum in scan order
        arg = np.argmax(flat, axis=-1)
        out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
        self._cache = (arg, x.shape)
        return out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        arg, x_shape = self._take_cache()
        s = self.spec.stride
        b, ch, d, h, w = x_shape
        od, oh, ow = grad.shape[2:]
        routed = np.zeros((*grad.shape, s**3))
        np.put_along_axis(routed, arg[..., None], grad[..., None], axis=-1)
        blocks = routed.reshape(b, ch, od, oh, ow, s, s, s).transpose(0, 1, 2, 5, 3, 6, 4, 7)
        dx = np.zeros(x_shape)
        dx[:, :, : od * s, : oh * s, : ow * s] = blocks.reshape(b, ch, od * s, oh * s, ow * s)
        return dx


class Dense(Layer):
    def __init__(self, in_features: int, spec: FullyConnectedSpec, rng: np.random.Generator) -> None:
        super().__init__()
        self.spec = spec
        self.params["weight"] = _fan_in_uniform(rng, (in_features, spec.nodes), in_features)
        self.params["bias"] = np.zeros(spec.nodes)
        self.zero_grad()

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        w = self.params["weight"]
        if x.ndim != 2 or x.shape[1] != w.shape[0]:
            raise ShapeMismatch(f"Dense expects (B, {w.shape[0]}), got {x.shape}")
        self._cache = x
        return x @ w + self.params["bias"]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._take_cache()
        self.grads["weight"] += x.T @ grad
        self.grads["bias"] += grad.sum(axis=0)
        return grad @ self.params["weight"].T


class ReLU(Layer):
    spec = ReLUSpec()

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        mask = x > 0
        self._cache = mask
        return np.where(mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.where(self._take_cache(), grad, 0.0)


class Tanh(Layer):
    spec = TanhSpec()

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        y = np.tanh(x)
        self._cache = y
        return y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        y = self._take_cache()
        return grad * (1.0 - y * y)


class Dropout(Layer):
    """Inverted dropout: kept activations are scaled by 1/(1-p) at train time."""

    def __init__(self, spec: DropoutSpec, rng: np.random.Generator) -> None:
        super().__init__()
        self.spec = spec
        self.rng = rng

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        if not training or self.spec.p == 0.0:
            self._cache = 1.0
            return x
        keep = 1.0 - self.spec.p
        mask = (self.rng.random(x.shape) < keep) / keep
        self._cache = mask
        return x * mask

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self._take_cache()


class Flatten(Layer):
    spec = FlattenSpec()

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad.reshape(self._take_cache())
