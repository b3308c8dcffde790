"""Domain error hierarchy.

Every error carries a machine tag (`code`) and the process exit code the CLI
uses when the error reaches the top level: 2 for config/input problems,
3 for runtime domain failures.
"""

from __future__ import annotations

EXIT_INPUT_ERROR = 2
EXIT_DOMAIN_ERROR = 3


class NbvError(Exception):
    code = "NBV_ERROR"
    exit_code = EXIT_DOMAIN_ERROR

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details


class InputError(NbvError):
    """Base for errors caused by the caller's files or configuration."""

    code = "INPUT_ERROR"
    exit_code = EXIT_INPUT_ERROR


# geometry
class DegeneratePosition(NbvError):
    code = "DEGENERATE_POSITION"


class InvalidScale(NbvError):
    code = "INVALID_SCALE"


class InvalidGeometry(NbvError):
    code = "INVALID_GEOMETRY"


# voxel grid
class InvalidDims(NbvError):
    code = "INVALID_DIMS"


class IndexOutOfBounds(NbvError):
    code = "INDEX_OUT_OF_BOUNDS"


class WrongDims(NbvError):
    code = "WRONG_DIMS"


# meshes
class ParseError(InputError):
    code = "PARSE_ERROR"


class DegenerateTriangle(InputError):
    code = "DEGENERATE_TRIANGLE"

    def __init__(self, message: str, *, face_index: int):
        super().__init__(message, face_index=face_index)
        self.face_index = face_index


class DegenerateMesh(NbvError):
    code = "DEGENERATE_MESH"


# planners
class EmptyCandidateSet(NbvError):
    code = "EMPTY_CANDIDATE_SET"


class ArityMismatch(NbvError):
    code = "ARITY_MISMATCH"


# network
class UnknownVariant(NbvError):
    code = "UNKNOWN_VARIANT"


class ShapeMismatch(NbvError):
    code = "SHAPE_MISMATCH"


class StaleCache(NbvError):
    code = "STALE_CACHE"


class NonFiniteTensor(NbvError):
    code = "NON_FINITE_TENSOR"


# datasets / files
class EmptyDataset(NbvError):
    code = "EMPTY_DATASET"


class EmptyReference(NbvError):
    code = "EMPTY_REFERENCE"


class FormatVersionMismatch(InputError):
    code = "FORMAT_VERSION_MISMATCH"


class ChecksumMismatch(InputError):
    code = "CHECKSUM_MISMATCH"


class NbvIOError(InputError):
    code = "IO_ERROR"


# cli
class ConfigError(InputError):
    code = "CONFIG_ERROR"


class OutputLocked(InputError):
    code = "OUTPUT_LOCKED"
