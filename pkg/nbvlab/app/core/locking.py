"""Output directory lock so two commands never write into the same run folder."""

from __future__ import annotations

import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator

from app.core.errors import NbvIOError, OutputLocked

logger = logging.getLogger(__name__)

LOCK_NAME = ".nbvlab.lock"


@contextmanager
def output_lock(directory: str | Path) -> Iterator[Path]:
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise NbvIOError(f"Cannot create output directory {out}: {exc}", path=str(out)) from exc
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise OutputLocked(
            f"Output directory {out} is in use by another command (remove {lock} if stale)",
            path=str(out),
        ) from exc
    try:
        os.write(fd, str(os.getpid()).encode("ascii"))
    finally:
        os.close(fd)
    try:
        yield out
    finally:
        try:
            lock.unlink()
        except FileNotFoundError:
            logger.warning("Lock file %s vanished before release", lock)
