"""
Procedural object corpus.

Simple solids are tessellated directly; composite objects are unions of
solids where faces buried inside another part are dropped, so every face
left is part of the visible outer surface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from app.core.errors import ConfigError
from app.core.geometry import rotation_from_tait_bryan
from app.models.mesh import TriangleMesh, load_mesh

SPHERE_SUBDIVISIONS = 3
SEGMENTS = 32

_PHI = (1.0 + math.sqrt(5.0)) / 2.0

_ICOSAHEDRON_VERTICES = [
    (-1, _PHI, 0), (1, _PHI, 0), (-1, -_PHI, 0), (1, -_PHI, 0),
    (0, -1, _PHI), (0, 1, _PHI), (0, -1, -_PHI), (0, 1, -_PHI),
    (_PHI, 0, -1), (_PHI, 0, 1), (-_PHI, 0, -1), (-_PHI, 0, 1),
]

_ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def icosphere(subdivisions: int = SPHERE_SUBDIVISIONS, radius: float = 1.0) -> TriangleMesh:
    """Subdivided icosahedron: 10 * 4^n + 2 vertices and 20 * 4^n faces."""
    vertices = [np.array(v, dtype=np.float64) / np.linalg.norm(v) for v in _ICOSAHEDRON_VERTICES]
    faces = list(_ICOSAHEDRON_FACES)
    for _ in range(subdivisions):
        midpoints: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in midpoints:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                midpoints[key] = len(vertices) - 1
            return midpoints[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = refined
    return TriangleMesh(np.array(vertices) * radius, np.array(faces, dtype=np.int64), name="sphere")


def box(size: tuple[float, float, float] = (1.0, 1.0, 1.0)) -> TriangleMesh:
    sx, sy, sz = (s / 2.0 for s in size)
    vertices = np.array(
        [[x, y, z] for x in (-sx, sx) for y in (-sy, sy) for z in (-sz, sz)],
        dtype=np.float64,
    )
    # vertex index = 4*ix + 2*iy + iz
    faces = [
        (0, 1, 3), (0, 3, 2),  # -x
        (4, 6, 7), (4, 7, 5),  # +x
        (0, 4, 5), (0, 5, 1),  # -y
        (2, 3, 7), (2, 7, 6),  # +y
        (0, 2, 6), (0, 6, 4),  # -z
        (1, 5, 7), (1, 7, 3),  # +z
    ]
    return TriangleMesh(vertices, np.array(faces, dtype=np.int64), name="box")


def _ring(radius: float, z: float, segments: int) -> np.ndarray:
    angles = np.arange(segments) * (2.0 * math.pi / segments)
    return np.stack([radius * np.cos(angles), radius * np.sin(angles), np.full(segments, z)], axis=1)


def cylinder(radius: float = 0.5, height: float = 1.0, segments: int = SEGMENTS) -> TriangleMesh:
    bottom = _ring(radius, -height / 2.0, segments)
    top = _ring(radius, height / 2.0, segments)
    centers = np.array([[0.0, 0.0, -height / 2.0], [0.0, 0.0, height / 2.0]])
    vertices = np.vstack([bottom, top, centers])
    cb, ct = 2 * segments, 2 * segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [(i, j, segments + j), (i, segments + j, segments + i)]
        faces += [(cb, j, i), (ct, segments + i, segments + j)]
    return TriangleMesh(vertices, np.array(faces, dtype=np.int64), name="cylinder")


def cone(radius: float = 0.5, height: float = 1.0, segments: int = SEGMENTS) -> TriangleMesh:
    base = _ring(radius, -height / 2.0, segments)
    vertices = np.vstack([base, [[0.0, 0.0, -height / 2.0], [0.0, 0.0, height / 2.0]]])
    cb, apex = segments, segments + 1
    faces = []
    for i in range(segments):
        j = (i + 1) % segments
        faces += [(i, j, apex), (cb, j, i)]
    return TriangleMesh(vertices, np.array(faces, dtype=np.int64), name="cone")


def torus(
    major_radius: float = 0.7,
    minor_radius: float = 0.25,
    major_segments: int = SEGMENTS,
    minor_segments: int = SEGMENTS // 2,
) -> TriangleMesh:
    u = np.arange(major_segments) * (2.0 * math.pi / major_segments)
    v = np.arange(minor_segments) * (2.0 * math.pi / minor_segments)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    r = major_radius + minor_radius * np.cos(vv)
    vertices = np.stack([r * np.cos(uu), r * np.sin(uu), minor_radius * np.sin(vv)], axis=-1).reshape(-1, 3)
    faces = []
    for i in range(major_segments):
        for j in range(minor_segments):
            a = i * minor_segments + j
            b = ((i + 1) % major_segments) * minor_segments + j
            c = ((i + 1) % major_segments) * minor_segments + (j + 1) % minor_segments
            d = i * minor_segments + (j + 1) % minor_segments
            faces += [(a, b, c), (a, c, d)]
    return TriangleMesh(vertices, np.array(faces, dtype=np.int64), name="torus")


# ---------------------------------------------------------------------- composites
@dataclass(frozen=True)
class Part:
    mesh: TriangleMesh
    inside: Callable[[np.ndarray], np.ndarray]  # local-frame containment test
    rotation: np.ndarray
    translation: np.ndarray

    def world_mesh(self) -> TriangleMesh:
        return self.mesh.transformed(self.rotation, self.translation)

    def contains(self, points: np.ndarray) -> np.ndarray:
        local = (points - self.translation) @ self.rotation
        return self.inside(local)


def _part(mesh: TriangleMesh, inside, yaw=0.0, pitch=0.0, roll=0.0, at=(0.0, 0.0, 0.0)) -> Part:
    return Part(mesh, inside, rotation_from_tait_bryan(yaw, pitch, roll), np.asarray(at, dtype=np.float64))


def _inside_sphere(radius: float):
    return lambda p: np.linalg.norm(p, axis=1) < radius


def _inside_cylinder(radius: float, height: float):
    return lambda p: (p[:, 0] ** 2 + p[:, 1] ** 2 < radius**2) & (np.abs(p[:, 2]) < height / 2.0)


def _inside_torus(major_radius: float, minor_radius: float):
    return lambda p: (np.hypot(p[:, 0], p[:, 1]) - major_radius) ** 2 + p[:, 2] ** 2 < minor_radius**2


def union(parts: list[Part], name: str) -> TriangleMesh:
    kept = []
    for i, part in enumerate(parts):
        mesh = part.world_mesh()
        centroids = mesh.triangles.mean(axis=1)
        buried = np.zeros(len(mesh.faces), dtype=bool)
        for j, other in enumerate(parts):
            if j != i:
                buried |= other.contains(centroids)
        kept.append(TriangleMesh(mesh.vertices, mesh.faces[~buried], mesh.name))
    return TriangleMesh.concatenate(kept, name=name)


def mug() -> TriangleMesh:
    body = _part(cylinder(0.5, 1.0), _inside_cylinder(0.5, 1.0))
    # handle ring stands in the XZ plane on the +X side
    handle = _part(torus(0.3, 0.08, SEGMENTS, 12), _inside_torus(0.3, 0.08), roll=math.pi / 2, at=(0.5, 0.0, 0.0))
    return union([body, handle], "mug")


def snowman() -> TriangleMesh:
    balls = [(0.5, 0.0), (0.35, 0.7), (0.22, 1.18)]
    return union(
        [_part(icosphere(SPHERE_SUBDIVISIONS, r), _inside_sphere(r), at=(0.0, 0.0, z)) for r, z in balls],
        "snowman",
    )


def dumbbell() -> TriangleMesh:
    bar = _part(cylinder(0.12, 1.6), _inside_cylinder(0.12, 1.6), pitch=math.pi / 2)
    ends = [_part(icosphere(SPHERE_SUBDIVISIONS, 0.35), _inside_sphere(0.35), at=(x, 0.0, 0.0)) for x in (-0.8, 0.8)]
    return union([bar, *ends], "dumbbell")


PRIMITIVE_BUILDERS: dict[str, Callable[[], TriangleMesh]] = {
    "sphere": lambda: icosphere(SPHERE_SUBDIVISIONS),
    "box": lambda: box((1.0, 0.7, 0.5)),
    "cylinder": lambda: cylinder(0.5, 1.2),
    "cone": lambda: cone(0.6, 1.2),
    "torus": lambda: torus(0.7, 0.25),
    "mug": mug,
    "snowman": snowman,
    "dumbbell": dumbbell,
}


def make_object(spec: str, size: float) -> TriangleMesh:
    """Build `primitive:<name>` (or a bare name) or load `mesh:<path>`, normalised to `size` meters."""
    kind, _, value = spec.partition(":")
    if not value:
        kind, value = "primitive", kind
    if kind == "primitive":
        builder = PRIMITIVE_BUILDERS.get(value)
        if builder is None:
            raise ConfigError(f"Unknown primitive {value!r}; expected one of {sorted(PRIMITIVE_BUILDERS)}")
        mesh = builder()
    elif kind == "mesh":
        mesh = load_mesh(Path(value))
    else:
        raise ConfigError(f"Object spec {spec!r} must look like primitive:<name> or mesh:<path>")
    normalized = mesh.normalized(size)
    normalized.name = value if kind == "primitive" else Path(value).stem
    return normalized.validate()
