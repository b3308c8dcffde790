"""Triangle meshes, scenes and the ASCII `v`/`f` mesh format."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from app.core.errors import DegenerateMesh, DegenerateTriangle, InvalidGeometry, NbvIOError, ParseError

logger = logging.getLogger(__name__)

MIN_TRIANGLE_AREA = 1e-12
TABLE_HALF_EXTENT = 5.0


class TriangleMesh:
    def __init__(self, vertices: np.ndarray, faces: np.ndarray, name: str = "mesh") -> None:
        self.vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        self.name = name
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise InvalidGeometry(f"Mesh {name!r} has face indices outside its {len(self.vertices)} vertices")
        if not np.all(np.isfinite(self.vertices)):
            raise InvalidGeometry(f"Mesh {name!r} has non-finite vertices")

    def __repr__(self) -> str:
        return f"TriangleMesh(name={self.name!r}, vertices={len(self.vertices)}, faces={len(self.faces)})"

    @property
    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    def areas(self) -> np.ndarray:
        tri = self.triangles
        return 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)

    def validate(self) -> "TriangleMesh":
        """Reject triangles with area at or below MIN_TRIANGLE_AREA."""
        if len(self.faces) == 0:
            raise DegenerateMesh(f"Mesh {self.name!r} has no faces")
        small = np.flatnonzero(self.areas() <= MIN_TRIANGLE_AREA)
        if small.size:
            index = int(small[0])
            raise DegenerateTriangle(
                f"Mesh {self.name!r}: face {index} has area <= {MIN_TRIANGLE_AREA} m^2",
                face_index=index,
            )
        return self

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def major_span(self) -> float:
        lo, hi = self.bounds
        return float(np.max(hi - lo))

    def transformed(self, rotation: np.ndarray | None = None, translation: Sequence[float] = (0.0, 0.0, 0.0)) -> "TriangleMesh":
        verts = self.vertices if rotation is None else self.vertices @ np.asarray(rotation).T
        return TriangleMesh(verts + np.asarray(translation, dtype=np.float64), self.faces.copy(), self.name)

    def scaled(self, factor: float | Sequence[float]) -> "TriangleMesh":
        return TriangleMesh(self.vertices * np.asarray(factor, dtype=np.float64), self.faces.copy(), self.name)

    def normalized(self, size: float) -> "TriangleMesh":
        """Centre the bounding box on the origin and scale the major span to `size` meters."""
        lo, hi = self.bounds
        span = float(np.max(hi - lo))
        if not span > 0:
            raise DegenerateMesh(f"Mesh {self.name!r} has zero extent")
        centred = self.vertices - (lo + hi) / 2.0
        return TriangleMesh(centred * (size / span), self.faces.copy(), self.name)

    @classmethod
    def concatenate(cls, meshes: Sequence["TriangleMesh"], name: str = "mesh") -> "TriangleMesh":
        vertices, faces, offset = [], [], 0
        for mesh in meshes:
            vertices.append(mesh.vertices)
            faces.append(mesh.faces + offset)
            offset += len(mesh.vertices)
        if not vertices:
            return cls(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64), name)
        return cls(np.vstack(vertices), np.vstack(faces), name)

    def write_obj(self, path: str | Path) -> None:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(f"# {self.name}\n")
                for x, y, z in self.vertices:
                    fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
                for a, b, c in self.faces + 1:
                    fh.write(f"f {a} {b} {c}\n")
        except OSError as exc:
            raise NbvIOError(f"Cannot write mesh {path}: {exc}", path=str(path)) from exc


def _face_index(token: str, vertex_count: int, line_no: int) -> int:
    head = token.split("/", 1)[0]
    try:
        value = int(head)
    except ValueError as exc:
        raise ParseError(f"line {line_no}: bad face index {token!r}", line=line_no) from exc
    # negative indices count back from the latest vertex
    index = value - 1 if value > 0 else vertex_count + value
    if value == 0 or not 0 <= index < vertex_count:
        raise ParseError(
            f"line {line_no}: face index {value} out of range (1..{vertex_count})",
            line=line_no,
        )
    return index


def parse_mesh_text(text: str, name: str = "mesh") -> TriangleMesh:
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tag, *rest = line.split()
        if tag == "v":
            if len(rest) < 3:
                raise ParseError(f"line {line_no}: vertex needs three coordinates", line=line_no)
            try:
                x, y, z = (float(v) for v in rest[:3])
            except ValueError as exc:
                raise ParseError(f"line {line_no}: bad vertex {line!r}", line=line_no) from exc
            vertices.append((x, y, z))
        elif tag == "f":
            if len(rest) < 3:
                raise ParseError(f"line {line_no}: face needs at least three indices", line=line_no)
            idx = [_face_index(tok, len(vertices), line_no) for tok in rest]
            # fan triangulation for polygons
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
    if not vertices or not faces:
        raise ParseError(f"{name}: no vertices or faces found")
    return TriangleMesh(np.array(vertices), np.array(faces, dtype=np.int64), name).validate()


def load_mesh(path: str | Path) -> TriangleMesh:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise NbvIOError(f"Cannot read mesh {p}: {exc}", path=str(p)) from exc
    mesh = parse_mesh_text(text, name=p.stem)
    logger.info("Loaded mesh %s: %d vertices, %d faces", p, len(mesh.vertices), len(mesh.faces))
    return mesh


@dataclass
class Scene:
    """Objects to sense plus an optional horizontal table plane."""

    meshes: list[TriangleMesh] = field(default_factory=list)
    table_height: Optional[float] = None
    name: str = "scene"

    @property
    def object_mesh(self) -> TriangleMesh:
        return TriangleMesh.concatenate(self.meshes, name=self.name)

    def table_mesh(self) -> TriangleMesh | None:
        if self.table_height is None:
            return None
        h, z = TABLE_HALF_EXTENT, float(self.table_height)
        vertices = np.array([[-h, -h, z], [h, -h, z], [h, h, z], [-h, h, z]])
        return TriangleMesh(vertices, np.array([[0, 1, 2], [0, 2, 3]]), name="table")

    def all_meshes(self) -> list[TriangleMesh]:
        table = self.table_mesh()
        return [*self.meshes, table] if table is not None else list(self.meshes)
