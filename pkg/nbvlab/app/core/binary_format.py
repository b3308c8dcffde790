"""
Little-endian binary container helpers shared by the weight and dataset files.

Both formats are `magic (4 bytes) | u32 version | body | u32 CRC32`, where the
checksum covers every byte before it. Files are written atomically.
"""

from __future__ import annotations

import logging
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from app.core.errors import ChecksumMismatch, FormatVersionMismatch, NbvIOError

logger = logging.getLogger(__name__)

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


def pack_u32(value: int) -> bytes:
    return _U32.pack(value)


def pack_u64(value: int) -> bytes:
    return _U64.pack(value)


def seal(payload: bytes) -> bytes:
    """Append the CRC32 trailer."""
    return payload + pack_u32(zlib.crc32(payload) & 0xFFFFFFFF)


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp_name, target)
        except BaseException:
            if os.path.exists(tmp_name):
                os.unlink(tmp_name)
            raise
    except OSError as exc:
        raise NbvIOError(f"Cannot write {target}: {exc}", path=str(target)) from exc
    logger.debug("Wrote %d bytes to %s", len(data), target)


def read_file_bytes(path: str | Path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise NbvIOError(f"Cannot read {path}: {exc}", path=str(path)) from exc


class BinaryReader:
    """Bounds-checked cursor over a sealed container."""

    def __init__(self, data: bytes, *, magic: bytes, version: int, label: str) -> None:
        self.data = data
        self.label = label
        self.offset = 0
        if len(data) < len(magic) + 8:
            raise NbvIOError(f"{label}: file is truncated ({len(data)} bytes)")
        if data[: len(magic)] != magic:
            raise FormatVersionMismatch(f"{label}: bad magic {data[:len(magic)]!r}, expected {magic!r}")
        self.offset = len(magic)
        found = self.u32()
        if found != version:
            raise FormatVersionMismatch(f"{label}: format version {found}, expected {version}")

    @property
    def body_end(self) -> int:
        return len(self.data) - 4

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if size < 0 or end > self.body_end:
            raise NbvIOError(f"{self.label}: file is truncated at byte {self.offset}")
        chunk = self.data[self.offset : end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def array(self, dtype: np.dtype | str, count: int) -> np.ndarray:
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt, count=count)

    def finish(self) -> None:
        """Check that exactly the trailer remains and that it matches."""
        if self.offset != self.body_end:
            raise NbvIOError(
                f"{self.label}: {self.body_end - self.offset} unexpected bytes before the checksum"
            )
        (stored,) = _U32.unpack_from(self.data, self.body_end)
        actual = zlib.crc32(self.data[: self.body_end]) & 0xFFFFFFFF
        if stored != actual:
            raise ChecksumMismatch(f"{self.label}: checksum {stored:#010x} does not match {actual:#010x}")
