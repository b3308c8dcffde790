"""
Weight file: `NBVW | u32 version | u32 len + architecture descriptor |
u32 array count | per array (u32 ndim, u32 dims..., float32 data) | CRC32`.

Parameters are stored as float32, so the first save rounds them; later
save/load cycles are exact.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from app.core import binary_format as bf
from app.core.errors import ShapeMismatch, UnknownVariant
from app.nn.network import CUSTOM_DESCRIPTOR, NbvNet, build_from_descriptor

logger = logging.getLogger(__name__)

MAGIC = b"NBVW"
VERSION = 1


def encode_weights(net: NbvNet) -> bytes:
    name = net.descriptor.encode("utf-8")
    params = net.parameters()
    parts = [MAGIC, bf.pack_u32(VERSION), bf.pack_u32(len(name)), name, bf.pack_u32(len(params))]
    for p in params:
        parts.append(bf.pack_u32(p.ndim))
        parts.extend(bf.pack_u32(d) for d in p.shape)
        parts.append(np.ascontiguousarray(p, dtype="<f4").tobytes())
    return bf.seal(b"".join(parts))


def save_weights(net: NbvNet, path: str | Path) -> None:
    bf.atomic_write_bytes(path, encode_weights(net))
    logger.info("Saved %s (%d parameters) to %s", net.descriptor, net.parameter_count(), path)


def decode_weights(data: bytes, label: str = "weights") -> tuple[str, list[np.ndarray]]:
    reader = bf.BinaryReader(data, magic=MAGIC, version=VERSION, label=label)
    descriptor = reader.take(reader.u32()).decode("utf-8", errors="replace")
    arrays = []
    for _ in range(reader.u32()):
        ndim = reader.u32()
        shape = tuple(reader.u32() for _ in range(ndim))
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        arrays.append(reader.array("<f4", count).reshape(shape).astype(np.float64))
    reader.finish()
    return descriptor, arrays


def load_weights(path: str | Path, net: NbvNet | None = None) -> NbvNet:
    """
    Load a weight file. With `net`, parameters are copied into it after the
    shapes are checked; otherwise the architecture is rebuilt from the file.
    """
    descriptor, arrays = decode_weights(bf.read_file_bytes(path), label=str(path))
    if net is None:
        if descriptor == CUSTOM_DESCRIPTOR:
            raise UnknownVariant(f"{path}: custom architectures need a target network to load into")
        net = build_from_descriptor(descriptor)
    elif descriptor != net.descriptor:
        logger.warning("Weight file %s was saved from %s, loading into %s", path, descriptor, net.descriptor)
    try:
        net.set_parameters(arrays)
    except ShapeMismatch as exc:
        raise ShapeMismatch(f"{path}: weights for {descriptor} do not fit {net.descriptor}: {exc}") from exc
    net.adam_m = net.adam_v = None
    net.adam_t = 0
    logger.info("Loaded %s from %s", descriptor, path)
    return net
