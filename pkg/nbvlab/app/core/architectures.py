"""Centralized NBV-net variant codes, layer tables and shape algebra."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union

from app.core.errors import ShapeMismatch, UnknownVariant

INPUT_SHAPE: tuple[int, int, int, int] = (1, 32, 32, 32)
DROPOUT_P = 0.5


class NetworkVariant(str, Enum):
    V3_3 = "3-3"
    V3_5 = "3-5"
    V4_3 = "4-3"
    V4_5 = "4-5"


class DropoutStart(str, Enum):
    NONE = "none"
    CONV1 = "conv1"
    CONV2 = "conv2"
    CONV3 = "conv3"
    CONV4 = "conv4"
    FC = "fc"


class Head(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


# Layer specs
@dataclass(frozen=True)
class Conv3dSpec:
    filters: int
    kernel: int = 3
    stride: int = 1
    padding: int = 1


@dataclass(frozen=True)
class MaxPool3dSpec:
    stride: int = 2


@dataclass(frozen=True)
class FullyConnectedSpec:
    nodes: int


@dataclass(frozen=True)
class ReLUSpec:
    pass


@dataclass(frozen=True)
class TanhSpec:
    pass


@dataclass(frozen=True)
class DropoutSpec:
    p: float = DROPOUT_P


@dataclass(frozen=True)
class FlattenSpec:
    pass


LayerSpec = Union[
    Conv3dSpec, MaxPool3dSpec, FullyConnectedSpec, ReLUSpec, TanhSpec, DropoutSpec, FlattenSpec
]


VARIANT_CONV_FILTERS: dict[str, tuple[int, ...]] = {
    NetworkVariant.V3_3.value: (10, 12, 8),
    NetworkVariant.V3_5.value: (10, 12, 8),
    NetworkVariant.V4_3.value: (16, 32, 64, 64),
    NetworkVariant.V4_5.value: (16, 32, 64, 64),
}

# Hidden fully connected widths (the output layer is appended separately)
VARIANT_HIDDEN_NODES: dict[str, tuple[int, ...]] = {
    NetworkVariant.V3_3.value: (1024, 500),
    NetworkVariant.V3_5.value: (1500, 500, 100, 50),
    NetworkVariant.V4_3.value: (1024, 500),
    NetworkVariant.V4_5.value: (1500, 500, 100, 50),
}

# Every variant pools after its first three convolutions
POOLED_CONVS = 3

DROPOUT_FIRST_CONV: dict[str, int] = {
    DropoutStart.CONV1.value: 1,
    DropoutStart.CONV2.value: 2,
    DropoutStart.CONV3.value: 3,
    DropoutStart.CONV4.value: 4,
}


def normalize_variant(value: str) -> str:
    raw = (value or "").strip().lower().replace("nbvnet-", "").replace("nbv-net ", "")
    if raw not in VARIANT_CONV_FILTERS:
        raise UnknownVariant(f"Unknown network variant {value!r}; expected one of {sorted(VARIANT_CONV_FILTERS)}")
    return raw


def normalize_dropout_start(value: str) -> str:
    try:
        return DropoutStart(value).value
    except ValueError:
        raise UnknownVariant(
            f"Unknown dropout start {value!r}; expected one of {[d.value for d in DropoutStart]}"
        ) from None


def normalize_head(value: str) -> str:
    try:
        return Head(value).value
    except ValueError:
        raise UnknownVariant(f"Unknown network head {value!r}; expected one of {[h.value for h in Head]}") from None


def variant_layers(
    variant: str,
    output_width: int,
    dropout_start: str = DropoutStart.NONE.value,
    head: str = Head.REGRESSION.value,
    width_divisor: int = 1,
) -> list[LayerSpec]:
    """Layer sequence for one of the four NBV-net variants."""
    name = normalize_variant(variant)
    dropout = normalize_dropout_start(dropout_start)
    head = normalize_head(head)
    if output_width < 1:
        raise ShapeMismatch(f"Output width must be positive, got {output_width}")
    if width_divisor < 1:
        raise ShapeMismatch(f"Width divisor must be positive, got {width_divisor}")

    first_dropout_conv = DROPOUT_FIRST_CONV.get(dropout)
    layers: list[LayerSpec] = []
    for position, filters in enumerate(VARIANT_CONV_FILTERS[name], start=1):
        layers.append(Conv3dSpec(filters=max(1, filters // width_divisor)))
        layers.append(ReLUSpec())
        if position <= POOLED_CONVS:
            layers.append(MaxPool3dSpec())
        if first_dropout_conv is not None and position >= first_dropout_conv:
            layers.append(DropoutSpec())

    layers.append(FlattenSpec())
    for nodes in VARIANT_HIDDEN_NODES[name]:
        layers.append(FullyConnectedSpec(nodes=max(1, nodes // width_divisor)))
        layers.append(ReLUSpec())
        if dropout != DropoutStart.NONE.value:
            layers.append(DropoutSpec())

    layers.append(FullyConnectedSpec(nodes=output_width))
    if head == Head.REGRESSION.value:
        layers.append(TanhSpec())
    return layers


def propagate_shapes(
    layers: list[LayerSpec],
    input_shape: tuple[int, ...] = INPUT_SHAPE,
) -> list[tuple[int, ...]]:
    """Symbolic per-sample output shape of every layer; raises ShapeMismatch if they do not compose."""
    shape = tuple(input_shape)
    shapes: list[tuple[int, ...]] = []
    for index, spec in enumerate(layers):
        if isinstance(spec, Conv3dSpec):
            if len(shape) != 4:
                raise ShapeMismatch(f"Layer {index}: Conv3d needs (C, D, H, W) input, got {shape}")
            spatial = tuple((d + 2 * spec.padding - spec.kernel) // spec.stride + 1 for d in shape[1:])
            if any(d < 1 for d in spatial):
                raise ShapeMismatch(f"Layer {index}: Conv3d output collapses to {spatial}")
            shape = (spec.filters, *spatial)
        elif isinstance(spec, MaxPool3dSpec):
            if len(shape) != 4:
                raise ShapeMismatch(f"Layer {index}: MaxPool3d needs (C, D, H, W) input, got {shape}")
            spatial = tuple(d // spec.stride for d in shape[1:])
            if any(d < 1 for d in spatial):
                raise ShapeMismatch(f"Layer {index}: MaxPool3d output collapses to {spatial}")
            shape = (shape[0], *spatial)
        elif isinstance(spec, FlattenSpec):
            size = 1
            for d in shape:
                size *= d
            shape = (size,)
        elif isinstance(spec, FullyConnectedSpec):
            if len(shape) != 1:
                raise ShapeMismatch(f"Layer {index}: FullyConnected needs flat input, got {shape}")
            shape = (spec.nodes,)
        shapes.append(shape)
    return shapes


def flattened_width(layers: list[LayerSpec], input_shape: tuple[int, ...] = INPUT_SHAPE) -> int:
    shapes = propagate_shapes(layers, input_shape)
    for spec, shape in zip(layers, shapes):
        if isinstance(spec, FlattenSpec):
            return shape[0]
    raise ShapeMismatch("Layer list has no Flatten layer")


def variant_descriptor(
    variant: str,
    output_width: int,
    dropout_start: str,
    head: str,
    width_divisor: int,
) -> str:
    return (
        f"nbvnet-{normalize_variant(variant)}:out={output_width}:dropout={normalize_dropout_start(dropout_start)}"
        f":head={normalize_head(head)}:width={width_divisor}"
    )


def parse_descriptor(descriptor: str) -> dict:
    """Inverse of variant_descriptor. Raises UnknownVariant for anything else."""
    parts = descriptor.split(":")
    if not parts or not parts[0].startswith("nbvnet-"):
        raise UnknownVariant(f"Weight file describes an unknown architecture {descriptor!r}")
    fields = dict(part.split("=", 1) for part in parts[1:] if "=" in part)
    try:
        return {
            "variant": normalize_variant(parts[0]),
            "output_width": int(fields["out"]),
            "dropout_start": normalize_dropout_start(fields.get("dropout", "none")),
            "head": normalize_head(fields.get("head", "regression")),
            "width_divisor": int(fields.get("width", "1")),
        }
    except (KeyError, ValueError) as exc:
        raise UnknownVariant(f"Malformed architecture descriptor {descriptor!r}") from exc
