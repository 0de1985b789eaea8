import math

import numpy as np
import pytest

from meshsal import (build_adjacency, build_ray_accel, compute_face_normals,
                     normalize_unit_diag)
from meshsal.procedural import icosphere, unit_cube

CUBE_OBJ = """\
# unit cube
v -0.5 -0.5 -0.5
v -0.5 -0.5 0.5
v -0.5 0.5 -0.5
v -0.5 0.5 0.5
v 0.5 -0.5 -0.5
v 0.5 -0.5 0.5
v 0.5 0.5 -0.5
v 0.5 0.5 0.5
f 1 2 4
f 1 4 3
f 5 7 8
f 5 8 6
f 1 5 6
f 1 6 2
f 3 4 8
f 3 8 7
f 1 3 7
f 1 7 5
f 2 6 8
f 2 8 4
"""


@pytest.fixture
def cube_obj(tmp_path):
    path = tmp_path / "cube.obj"
    path.write_text(CUBE_OBJ)
    return path


@pytest.fixture
def cube_mesh():
    m = unit_cube()
    compute_face_normals(m)
    return m


@pytest.fixture
def sphere_mesh():
    """Normalized icosphere with all derived structures."""
    m = icosphere(subdivisions=3, radius=0.5)
    m, _ = normalize_unit_diag(m)
    compute_face_normals(m)
    return m


@pytest.fixture
def sphere_setup(sphere_mesh):
    adj = build_adjacency(sphere_mesh)
    accel = build_ray_accel(sphere_mesh)
    return sphere_mesh, adj, accel


def assert_unit(v, tol=1e-9):
    assert abs(np.linalg.norm(v) - 1.0) <= tol


def angle_deg(a, b):
    d = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return math.degrees(math.acos(max(-1.0, min(1.0, d))))
