"""NBV-net: an ordered stack of layers built from a LayerSpec list."""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from app.core import architectures as arch
from app.core.config import settings
from app.core.errors import NonFiniteTensor, ShapeMismatch, StaleCache
from app.nn.layers import Conv3d, Dense, Dropout, Flatten, Layer, MaxPool3d, ReLU, Tanh

logger = logging.getLogger(__name__)

CUSTOM_DESCRIPTOR = "custom"


class NbvNet:
    def __init__(
        self,
        specs: Sequence[arch.LayerSpec],
        *,
        input_shape: tuple[int, ...] = arch.INPUT_SHAPE,
        seed: int = 0,
        descriptor: str = CUSTOM_DESCRIPTOR,
    ) -> None:
        self.specs = list(specs)
        self.input_shape = tuple(input_shape)
        self.shapes = arch.propagate_shapes(self.specs, self.input_shape)
        if len(self.shapes[-1]) != 1:
            raise ShapeMismatch(f"Network must end in a flat output, got {self.shapes[-1]}")
        self.output_width = self.shapes[-1][0]
        self.descriptor = descriptor
        self.seed = seed
        self.training = False

        init_seq, dropout_seq = np.random.SeedSequence(seed).spawn(2)
        init_rng = np.random.default_rng(init_seq)
        self.dropout_rng = np.random.default_rng(dropout_seq)

        self.layers: list[Layer] = []
        shape = self.input_shape
        for spec, out_shape in zip(self.specs, self.shapes):
            self.layers.append(self._make_layer(spec, shape, init_rng))
            shape = out_shape

        # Adam moment buffers, created on the first optimiser step
        self.adam_m: list[np.ndarray] | None = None
        self.adam_v: list[np.ndarray] | None = None
        self.adam_t = 0
        self._forward_done = False

    def _make_layer(self, spec: arch.LayerSpec, in_shape: tuple[int, ...], rng: np.random.Generator) -> Layer:
        if isinstance(spec, arch.Conv3dSpec):
            return Conv3d(in_shape[0], spec, rng)
        if isinstance(spec, arch.MaxPool3dSpec):
            return MaxPool3d(spec)
        if isinstance(spec, arch.FullyConnectedSpec):
            return Dense(in_shape[0], spec, rng)
        if isinstance(spec, arch.DropoutSpec):
            return Dropout(spec, self.dropout_rng)
        if isinstance(spec, arch.ReLUSpec):
            return ReLU()
        if isinstance(spec, arch.TanhSpec):
            return Tanh()
        if isinstance(spec, arch.FlattenSpec):
            return Flatten()
        raise ShapeMismatch(f"Unsupported layer spec {spec!r}")

    def __repr__(self) -> str:
        return f"NbvNet({self.descriptor!r}, params={self.parameter_count()})"

    # ------------------------------------------------------------------ mode
    def train(self) -> "NbvNet":
        self.training = True
        return self

    def eval(self) -> "NbvNet":
        self.training = False
        return self

    # ------------------------------------------------------------------ parameters
    def parameters(self) -> list[np.ndarray]:
        """Trainable arrays in declaration order (per layer: weight, then bias)."""
        return [layer.params[name] for layer in self.layers for name in ("weight", "bias") if name in layer.params]

    def gradients(self) -> list[np.ndarray]:
        return [layer.grads[name] for layer in self.layers for name in ("weight", "bias") if name in layer.params]

    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self) -> None:
        for layer in self.layers:
            layer.zero_grad()

    def set_parameters(self, values: Sequence[np.ndarray]) -> None:
        current = self.parameters()
        if len(values) != len(current):
            raise ShapeMismatch(f"Expected {len(current)} parameter arrays, got {len(values)}")
        for index, (target, value) in enumerate(zip(current, values)):
            if tuple(target.shape) != tuple(np.shape(value)):
                raise ShapeMismatch(
                    f"Parameter {index}: shape {tuple(np.shape(value))} does not match {tuple(target.shape)}"
                )
        for target, value in zip(current, values):
            target[...] = value

    # ------------------------------------------------------------------ passes
    def _check_finite(self, tensor: np.ndarray, where: str) -> None:
        if settings.NBV_DEBUG_FINITE_CHECKS and not np.all(np.isfinite(tensor)):
            raise NonFiniteTensor(f"Non-finite values after {where}")

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != len(self.input_shape) + 1 or tuple(x.shape[1:]) != self.input_shape:
            raise ShapeMismatch(f"Network input must be (batch, {', '.join(map(str, self.input_shape))}), got {x.shape}")
        for index, layer in enumerate(self.layers):
            x = layer.forward(x, self.training)
            self._check_finite(x, f"layer {index} ({type(layer).__name__})")
        self._forward_done = True
        return x

    def backward(self, loss_gradient: np.ndarray, *, accumulate: bool = False) -> list[np.ndarray]:
        """Back-propagate dLoss/dOutput; returns parameter gradients in `parameters()` order."""
        if not self._forward_done:
            raise StaleCache("backward() needs a preceding forward() pass")
        if not accumulate:
            self.zero_grad()
        grad = np.asarray(loss_gradient, dtype=np.float64)
        for index in range(len(self.layers) - 1, -1, -1):
            grad = self.layers[index].backward(grad)
            self._check_finite(grad, f"backward through layer {index}")
        self._forward_done = False
        return self.gradients()

    def predict(self, x: np.ndarray, batch_size: int = 32) -> np.ndarray:
        """Eval-mode forward in chunks; leaves the mode flag as it was."""
        was_training = self.training
        self.eval()
        try:
            chunks = [self.forward(x[i : i + batch_size]) for i in range(0, len(x), batch_size)]
        finally:
            self.training = was_training
            self._forward_done = False
        if not chunks:
            return np.empty((0, self.output_width))
        return np.concatenate(chunks)


def build_variant(
    name: str,
    output_width: int = 3,
    dropout_start: str = arch.DropoutStart.NONE.value,
    seed: int = 0,
    *,
    head: str = arch.Head.REGRESSION.value,
    width_divisor: int = 1,
) -> NbvNet:
    """One of the four NBV-net variants; `width_divisor` > 1 gives a slimmer copy for quick checks."""
    specs = arch.variant_layers(name, output_width, dropout_start, head, width_divisor)
    descriptor = arch.variant_descriptor(name, output_width, dropout_start, head, width_divisor)
    net = NbvNet(specs, seed=seed, descriptor=descriptor)
    logger.debug("Built %s with %d parameters", descriptor, net.parameter_count())
    return net


def build_from_descriptor(descriptor: str, seed: int = 0) -> NbvNet:
    fields = arch.parse_descriptor(descriptor)
    return build_variant(
        fields["variant"],
        fields["output_width"],
        fields["dropout_start"],
        seed,
        head=fields["head"],
        width_divisor=fields["width_divisor"],
    )
