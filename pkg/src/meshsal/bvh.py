"""Bounding-volume hierarchy for nearest-hit ray queries.

Median-split BVH built with vectorized numpy; traversal runs in the active
kernel backend (compiled or pure). Queries return exactly the nearest
intersection a brute-force scan over all faces would, with ties on t broken
by the lowest face index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .mesh import TriangleMesh

# Minimum accepted hit distance; rejects self-intersection for origins
# sitting on a surface. Scale-safe because meshes are diag-normalized.
T_EPS = 1e-7


@dataclass
class RayHit:
    """One nearest ray-surface collision."""

    face: int
    t: float
    point: np.ndarray


@dataclass
class RayAccel:
    """Flattened BVH over mesh faces plus build statistics."""

    node_min: np.ndarray
    node_max: np.ndarray
    child_left: np.ndarray
    child_right: np.ndarray
    leaf_start: np.ndarray
    leaf_count: np.ndarray
    prim_order: np.ndarray
    tri_v0: np.ndarray
    tri_e1: np.ndarray
    tri_e2: np.ndarray
    node_count: int
    depth: int


def build_ray_accel(mesh: TriangleMesh, leaf_size: int = 8) -> RayAccel:
    """Build the BVH: top-down median split along the widest centroid axis."""
    if mesh.n_faces == 0:
        raise ValueError("cannot build acceleration structure on empty mesh")
    tri = mesh.vertices[mesh.faces]
    prim_min = tri.min(axis=1)
    prim_max = tri.max(axis=1)
    centroids = tri.mean(axis=1)
    n = mesh.n_faces
    order = np.arange(n, dtype=np.int64)

    node_min = []
    node_max = []
    child_left = []
    child_right = []
    leaf_start = []
    leaf_count = []

    def alloc() -> int:
        node_min.append(None)
        node_max.append(None)
        child_left.append(-1)
        child_right.append(-1)
        leaf_start.append(0)
        leaf_count.append(0)
        return len(node_min) - 1

    depth = 0
    stack = [(alloc(), 0, n, 0)]
    while stack:
        node, lo, hi, d = stack.pop()
        depth = max(depth, d)
        sel = order[lo:hi]
        node_min[node] = prim_min[sel].min(axis=0)
        node_max[node] = prim_max[sel].max(axis=0)
        count = hi - lo
        if count <= leaf_size:
            leaf_start[node] = lo
            leaf_count[node] = count
            continue
        cent = centroids[sel]
        axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
        mid = count // 2
        part = np.argpartition(cent[:, axis], mid)
        order[lo:hi] = sel[part]
        left = alloc()
        right = alloc()
        child_left[node] = left
        child_right[node] = right
        stack.append((left, lo, lo + mid, d + 1))
        stack.append((right, lo + mid, hi, d + 1))

    # Reorder triangle data so each leaf reads a contiguous slice.
    v0 = tri[order, 0]
    return RayAccel(
        node_min=np.ascontiguousarray(np.array(node_min)),
        node_max=np.ascontiguousarray(np.array(node_max)),
        child_left=np.asarray(child_left, dtype=np.int64),
        child_right=np.asarray(child_right, dtype=np.int64),
        leaf_start=np.asarray(leaf_start, dtype=np.int64),
        leaf_count=np.asarray(leaf_count, dtype=np.int64),
        prim_order=order,
        tri_v0=np.ascontiguousarray(v0),
        tri_e1=np.ascontiguousarray(tri[order, 1] - v0),
        tri_e2=np.ascontiguousarray(tri[order, 2] - v0),
        node_count=len(node_min),
        depth=depth,
    )


def cast_rays(accel: RayAccel, origins: np.ndarray, dirs: np.ndarray,
              backend=None):
    """Batch nearest-hit query.

    Returns ``(faces, ts)`` with ``faces == -1`` marking misses. Directions
    are expected normalized (t is then a metric distance).
    """
    origins = np.ascontiguousarray(origins, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    if origins.shape != dirs.shape or origins.ndim != 2 or origins.shape[1] != 3:
        raise ValueError("origins and dirs must both be (N, 3)")
    impl = backend if backend is not None else _kernels
    return impl.bvh_nearest_hits(
        accel.node_min, accel.node_max, accel.child_left, accel.child_right,
        accel.leaf_start, accel.leaf_count, accel.prim_order,
        accel.tri_v0, accel.tri_e1, accel.tri_e2,
        origins, dirs, T_EPS)


def ray_nearest_hit(accel: RayAccel, origin, direction) -> Optional[RayHit]:
    """Nearest intersection of one ray, or None on a miss."""
    o = np.asarray(origin, dtype=np.float64).reshape(1, 3)
    d = np.asarray(direction, dtype=np.float64).reshape(1, 3)
    faces, ts = cast_rays(accel, o, d)
    if faces[0] < 0:
        return None
    t = float(ts[0])
    return RayHit(face=int(faces[0]), t=t, point=o[0] + t * d[0])
