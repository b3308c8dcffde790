"""
Vectorised ray/triangle intersection (Moller-Trumbore).

Rays are tested against every triangle in chunks so the (rays x triangles)
intermediates stay bounded in memory.
"""

from __future__ import annotations

import numpy as np

from app.core.voxel_traversal import clip_to_box

# Rays closer to parallel than this are treated as misses
DET_EPS = 1e-14
# Barycentric slack so rays through shared edges/vertices still hit
BARY_EPS = 1e-12

MAX_PAIRS_PER_CHUNK = 1 << 20


def nearest_hits(
    origins: np.ndarray,
    directions: np.ndarray,
    triangles: np.ndarray,
    t_min: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Nearest intersection with t > t_min for each ray.

    `triangles` is (T, 3, 3). Returns (t, face) with t = inf and face = -1 for misses.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    n = directions.shape[0]
    origins = np.broadcast_to(origins, (n, 3))
    best_t = np.full(n, np.inf)
    best_face = np.full(n, -1, dtype=np.int64)
    if n == 0 or triangles.shape[0] == 0:
        return best_t, best_face

    v0 = triangles[:, 0, :]
    e1 = triangles[:, 1, :] - v0
    e2 = triangles[:, 2, :] - v0
    chunk = max(1, MAX_PAIRS_PER_CHUNK // triangles.shape[0])

    for start in range(0, n, chunk):
        o = origins[start : start + chunk, None, :]
        d = directions[start : start + chunk, None, :]
        pvec = np.cross(d, e2[None, :, :])
        det = np.einsum("tk,rtk->rt", e1, pvec)
        ok = np.abs(det) > DET_EPS
        inv = np.divide(1.0, det, out=np.zeros_like(det), where=ok)
        tvec = o - v0[None, :, :]
        u = np.einsum("rtk,rtk->rt", tvec, pvec) * inv
        qvec = np.cross(tvec, e1[None, :, :])
        v = np.einsum("rtk,rtk->rt", np.broadcast_to(d, qvec.shape), qvec) * inv
        t = np.einsum("tk,rtk->rt", e2, qvec) * inv
        hit = ok & (u >= -BARY_EPS) & (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS) & (t > t_min)
        t = np.where(hit, t, np.inf)
        face = np.argmin(t, axis=1)
        t_best = t[np.arange(t.shape[0]), face]
        sl = slice(start, start + t.shape[0])
        better = t_best < best_t[sl]
        best_t[sl] = np.where(better, t_best, best_t[sl])
        best_face[sl] = np.where(better, face, best_face[sl])
    return best_t, best_face


def rays_hitting_box(
    origins: np.ndarray,
    directions: np.ndarray,
    box_min: np.ndarray,
    box_max: np.ndarray,
) -> np.ndarray:
    """Mask of rays whose forward half-line touches the axis-aligned box."""
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    directions = np.atleast_2d(np.asarray(directions, dtype=np.float64))
    origins = np.broadcast_to(origins, directions.shape)
    t_near, t_far = clip_to_box(origins, directions, box_min, box_max)
    return (t_near <= t_far) & (t_far >= 0.0)
