"""Per-component seed derivation from the single run seed."""

from __future__ import annotations

import hashlib

import numpy as np


def component_seed(seed: int, name: str) -> int:
    """Stable 32-bit seed for `name`; independent of PYTHONHASHSEED."""
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def component_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(component_seed(seed, name))
