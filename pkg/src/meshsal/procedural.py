"""Procedural test meshes: spheres, grids, boxes, disconnected fixtures.

Used by the test suite and the kernel benchmark; handy for scale trials
without shipping large model files.
"""

from __future__ import annotations

import numpy as np

from .mesh import TriangleMesh


def unit_cube() -> TriangleMesh:
    """Axis-aligned cube spanning [-0.5, 0.5]^3, 12 triangles, CCW outward."""
    v = np.array([[x, y, z]
                  for x in (-0.5, 0.5)
                  for y in (-0.5, 0.5)
                  for z in (-0.5, 0.5)], dtype=np.float64)
    quads = [
        (0, 1, 3, 2),  # x = -0.5
        (4, 6, 7, 5),  # x = +0.5
        (0, 4, 5, 1),  # y = -0.5
        (2, 3, 7, 6),  # y = +0.5
        (0, 2, 6, 4),  # z = -0.5
        (1, 5, 7, 3),  # z = +0.5
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append((a, b, c))
        faces.append((a, c, d))
    return TriangleMesh(v, np.asarray(faces, dtype=np.int64))


def icosahedron(radius: float = 1.0) -> TriangleMesh:
    """Regular icosahedron: 12 vertices, 20 faces, every face 3 neighbors."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    v *= radius / np.linalg.norm(v[0])
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ], dtype=np.int64)
    return TriangleMesh(v, f)


def icosphere(subdivisions: int = 2, radius: float = 0.5) -> TriangleMesh:
    """Icosahedron subdivided ``subdivisions`` times, projected to a sphere.

    Face count is 20 * 4^subdivisions with near-uniform edge lengths.
    """
    mesh = icosahedron(radius=1.0)
    verts = [tuple(p) for p in mesh.vertices]
    faces = mesh.faces.tolist()
    for _ in range(subdivisions):
        cache = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                p = (np.asarray(verts[i]) + np.asarray(verts[j])) / 2.0
                p = p / np.linalg.norm(p) * np.linalg.norm(verts[0])
                cache[key] = len(verts)
                verts.append(tuple(p))
            return cache[key]

        for a, b, c in faces:
            ab = midpoint(a, b)
            bc = midpoint(b, c)
            ca = midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc],
                          [ab, bc, ca]]
        faces = new_faces
    v = np.asarray(verts, dtype=np.float64)
    v = v / np.linalg.norm(v, axis=1, keepdims=True) * radius
    return TriangleMesh(v, np.asarray(faces, dtype=np.int64))


def uv_sphere(n_lat: int, n_lon: int, radius: float = 0.5) -> TriangleMesh:
    """Latitude/longitude sphere with 2 * n_lat * n_lon triangles."""
    lats = np.linspace(0.0, np.pi, n_lat + 1)
    lons = np.linspace(0.0, 2.0 * np.pi, n_lon, endpoint=False)
    ring_ids = []
    verts = [np.array([0.0, 0.0, radius])]
    for i in range(1, n_lat):
        base = len(verts)
        ring_ids.append(base)
        z = radius * np.cos(lats[i])
        r = radius * np.sin(lats[i])
        for lon in lons:
            verts.append(np.array([r * np.cos(lon), r * np.sin(lon), z]))
    south = len(verts)
    verts.append(np.array([0.0, 0.0, -radius]))

    faces = []
    first = ring_ids[0]
    for j in range(n_lon):
        faces.append([0, first + j, first + (j + 1) % n_lon])
    for i in range(len(ring_ids) - 1):
        a = ring_ids[i]
        b = ring_ids[i + 1]
        for j in range(n_lon):
            jn = (j + 1) % n_lon
            faces.append([a + j, b + j, b + jn])
            faces.append([a + j, b + jn, a + jn])
    last = ring_ids[-1]
    for j in range(n_lon):
        faces.append([last + j, south, last + (j + 1) % n_lon])
    return TriangleMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))


def grid_patch(nx: int, ny: int, size: float = 1.0, z: float = 0.0,
               origin=(0.0, 0.0)) -> TriangleMesh:
    """Planar grid of nx*ny cells (2 triangles each) in the z plane."""
    xs = np.linspace(0.0, size, nx + 1) + origin[0]
    ys = np.linspace(0.0, size * ny / nx, ny + 1) + origin[1]
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, z)], axis=1)
    faces = []
    for i in range(nx):
        for j in range(ny):
            a = i * (ny + 1) + j
            b = (i + 1) * (ny + 1) + j
            faces.append([a, b, b + 1])
            faces.append([a, b + 1, a + 1])
    return TriangleMesh(verts, np.asarray(faces, dtype=np.int64))


def parallel_planes(n: int = 10, gap: float = 0.03,
                    size: float = 1.0) -> TriangleMesh:
    """Two identical disconnected grids ``gap`` apart along z.

    Face indices 0 .. 2*n*n-1 belong to the z=0 plane, the rest to z=gap;
    matching faces sit exactly ``gap`` apart centroid-to-centroid.
    """
    a = grid_patch(n, n, size=size, z=0.0)
    b = grid_patch(n, n, size=size, z=gap)
    verts = np.concatenate([a.vertices, b.vertices])
    faces = np.concatenate([a.faces, b.faces + len(a.vertices)])
    return TriangleMesh(verts, faces)


def jittered(mesh: TriangleMesh, amount: float, seed: int = 0) -> TriangleMesh:
    """Copy with vertices perturbed uniformly within +-amount per axis."""
    rng = np.random.default_rng(seed)
    verts = mesh.vertices + rng.uniform(-amount, amount, mesh.vertices.shape)
    return TriangleMesh(verts, mesh.faces)
