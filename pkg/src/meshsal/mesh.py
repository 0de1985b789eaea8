"""Triangle mesh ingestion, normalization, and derived geometry.

A mesh enters as an indexed triangle soup (OBJ or PLY), gets isotropically
rescaled so its bounding-box diagonal is exactly 1, and grows the derived
structures the rest of the pipeline consumes: per-face unit normals and
centroids, the edge-sharing face graph, vertex/face incidence, and one-ring
vertex neighborhoods.

All structures are immutable once built; concurrent read-only queries are
safe. Construction is single-threaded per mesh.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

# Cross-product norms at or below this are treated as zero area.
DEGENERATE_AREA_EPS = 1e-12


class MeshLoadError(ValueError):
    """Raised for unreadable or structurally invalid mesh files."""


@dataclass
class TriangleMesh:
    """Indexed triangle mesh with lazily populated derived fields.

    ``vertices`` is (V, 3) float64, ``faces`` is (F, 3) int64. The AABB and
    its diagonal are always populated; normals/centroids appear after
    :func:`compute_face_normals`.
    """

    vertices: np.ndarray
    faces: np.ndarray
    face_normals: Optional[np.ndarray] = None
    face_centroids: Optional[np.ndarray] = None
    degenerate_faces: Optional[np.ndarray] = None
    aabb: tuple = field(init=False)
    diag: float = field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (V, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be (F, 3)")
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
                raise ValueError("face index out of range")
            f = self.faces
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2])
                      | (f[:, 0] == f[:, 2])):
                raise ValueError("face with repeated vertex index")
        p_min = self.vertices.min(axis=0) if len(self.vertices) else np.zeros(3)
        p_max = self.vertices.max(axis=0) if len(self.vertices) else np.zeros(3)
        self.aabb = (p_min, p_max)
        self.diag = float(np.linalg.norm(p_max - p_min))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def aabb_center(self) -> np.ndarray:
        return 0.5 * (self.aabb[0] + self.aabb[1])


@dataclass
class AdjacencyIndex:
    """Edge-sharing face graph plus vertex incidence, in CSR form.

    ``face_indptr/face_indices`` give, for each face, the faces sharing an
    edge with it; ``face_step`` carries the matching centroid-to-centroid
    distances. ``avg_step`` is the mean centroid distance over a seeded
    sample of adjacent face pairs and sets the physical scale of one hop.
    """

    n_faces: int
    n_vertices: int
    face_indptr: np.ndarray
    face_indices: np.ndarray
    face_step: np.ndarray
    vert_face_indptr: np.ndarray
    vert_face_indices: np.ndarray
    vert_vert_indptr: np.ndarray
    vert_vert_indices: np.ndarray
    avg_step: float

    def adjacent_faces(self, f: int) -> np.ndarray:
        return self.face_indices[self.face_indptr[f]:self.face_indptr[f + 1]]

    def incident_faces(self, v: int) -> np.ndarray:
        return self.vert_face_indices[
            self.vert_face_indptr[v]:self.vert_face_indptr[v + 1]]

    def vertex_neighbors(self, v: int) -> np.ndarray:
        return self.vert_vert_indices[
            self.vert_vert_indptr[v]:self.vert_vert_indptr[v + 1]]


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_mesh(path, fmt: Optional[str] = None) -> TriangleMesh:
    """Load a triangle mesh from an OBJ or PLY file.

    ``fmt`` may be 'obj' or 'ply'; by default it is taken from the file
    extension. Materials, texture coordinates, and stored normals are
    ignored; normals are always recomputed so the incidence filter sees a
    consistent winding convention. Polygons with more than three vertices
    are rejected (no automatic triangulation).
    """
    path = str(path)
    if fmt is None:
        low = path.lower()
        if low.endswith(".obj"):
            fmt = "obj"
        elif low.endswith(".ply"):
            fmt = "ply"
        else:
            raise MeshLoadError(f"{path}: cannot infer format from extension")
    if fmt == "obj":
        vertices, faces = _parse_obj(path)
    elif fmt == "ply":
        vertices, faces = _parse_ply(path)
    else:
        raise MeshLoadError(f"unsupported format {fmt!r}")
    if len(faces) == 0 or len(vertices) == 0:
        raise MeshLoadError(f"{path}: empty mesh")
    try:
        return TriangleMesh(np.asarray(vertices), np.asarray(faces))
    except ValueError as exc:
        raise MeshLoadError(f"{path}: {exc}") from exc


def _parse_obj(path):
    vertices = []
    faces = []
    with open(path, "r", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshLoadError(
                        f"{path}: malformed vertex at line {lineno}")
                try:
                    vertices.append([float(parts[1]), float(parts[2]),
                                     float(parts[3])])
                except ValueError:
                    raise MeshLoadError(
                        f"{path}: malformed vertex at line {lineno}") from None
            elif tag == "f":
                refs = parts[1:]
                if len(refs) != 3:
                    raise MeshLoadError(
                        f"{path}: non-triangle face at line {lineno}")
                idx = []
                for ref in refs:
                    tok = ref.split("/")[0]
                    try:
                        i = int(tok)
                    except ValueError:
                        raise MeshLoadError(
                            f"{path}: malformed face at line {lineno}") from None
                    # OBJ indices are 1-based; negative ones are relative
                    # to the vertices defined so far.
                    if i > 0:
                        i -= 1
                    elif i < 0:
                        i += len(vertices)
                    else:
                        raise MeshLoadError(
                            f"{path}: zero face index at line {lineno}")
                    if i < 0 or i >= len(vertices):
                        raise MeshLoadError(
                            f"{path}: face index out of range at line {lineno}")
                    idx.append(i)
                faces.append(idx)
            # v?/vt/vn/usemtl/mtllib/o/g/s etc. are ignored
    return vertices, faces


_PLY_SCALAR = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _parse_ply(path):
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"ply":
            raise MeshLoadError(f"{path}: not a PLY file (line 1)")
        binary = None
        elements = []  # (name, count, [(prop_name, dtype_or_list_spec)])
        lineno = 1
        while True:
            raw = fh.readline()
            lineno += 1
            if not raw:
                raise MeshLoadError(f"{path}: truncated header (line {lineno})")
            parts = raw.decode("ascii", errors="replace").split()
            if not parts or parts[0] == "comment":
                continue
            if parts[0] == "format":
                if parts[1] == "ascii":
                    binary = False
                elif parts[1] == "binary_little_endian":
                    binary = True
                else:
                    raise MeshLoadError(
                        f"{path}: unsupported PLY format {parts[1]!r} "
                        f"(line {lineno})")
            elif parts[0] == "element":
                elements.append([parts[1], int(parts[2]), []])
            elif parts[0] == "property":
                if not elements:
                    raise MeshLoadError(
                        f"{path}: property before element (line {lineno})")
                if parts[1] == "list":
                    elements[-1][2].append(
                        (parts[4], ("list", parts[2], parts[3])))
                else:
                    elements[-1][2].append((parts[2], parts[1]))
            elif parts[0] == "end_header":
                break
        if binary is None:
            raise MeshLoadError(f"{path}: missing PLY format line")

        vertices = None
        faces = None
        for name, count, props in elements:
            if name == "vertex":
                vertices = _read_ply_vertices(fh, path, count, props, binary)
            elif name == "face":
                faces = _read_ply_faces(fh, path, count, props, binary)
            else:
                _skip_ply_element(fh, path, count, props, binary)
        if vertices is None:
            raise MeshLoadError(f"{path}: no vertex element")
        if faces is None:
            raise MeshLoadError(f"{path}: no face element")
        return vertices, faces


def _read_ply_vertices(fh, path, count, props, binary):
    names = [p[0] for p in props]
    for axis in ("x", "y", "z"):
        if axis not in names:
            raise MeshLoadError(f"{path}: vertex element missing '{axis}'")
    if any(isinstance(p[1], tuple) for p in props):
        raise MeshLoadError(f"{path}: list property on vertex element")
    if binary:
        dt = np.dtype([(n, "<" + _PLY_SCALAR[t]) for n, t in props])
        buf = fh.read(dt.itemsize * count)
        if len(buf) != dt.itemsize * count:
            raise MeshLoadError(f"{path}: truncated vertex data")
        rec = np.frombuffer(buf, dtype=dt)
        return np.stack([rec["x"], rec["y"], rec["z"]],
                        axis=1).astype(np.float64)
    xi, yi, zi = names.index("x"), names.index("y"), names.index("z")
    out = np.empty((count, 3))
    for i in range(count):
        parts = fh.readline().split()
        if len(parts) < len(props):
            raise MeshLoadError(f"{path}: malformed vertex record {i}")
        out[i, 0] = float(parts[xi])
        out[i, 1] = float(parts[yi])
        out[i, 2] = float(parts[zi])
    return out


def _read_ply_faces(fh, path, count, props, binary):
    if len(props) != 1 or not isinstance(props[0][1], tuple):
        raise MeshLoadError(
            f"{path}: face element must carry exactly one index list")
    name = props[0][0]
    if name not in ("vertex_indices", "vertex_index"):
        raise MeshLoadError(f"{path}: unexpected face property {name!r}")
    _, count_t, index_t = props[0][1]
    if binary:
        cdt = np.dtype("<" + _PLY_SCALAR[count_t])
        idt = np.dtype("<" + _PLY_SCALAR[index_t])
        # Fast path: assume every face is a triangle, then verify.
        rec_dt = np.dtype([("n", cdt), ("idx", idt, (3,))])
        buf = fh.read(rec_dt.itemsize * count)
        if len(buf) != rec_dt.itemsize * count:
            raise MeshLoadError(f"{path}: truncated face data")
        rec = np.frombuffer(buf, dtype=rec_dt)
        bad = np.nonzero(rec["n"] != 3)[0]
        if bad.size:
            raise MeshLoadError(
                f"{path}: non-triangle face at record {int(bad[0])}")
        return rec["idx"].astype(np.int64)
    out = np.empty((count, 3), dtype=np.int64)
    for i in range(count):
        parts = fh.readline().split()
        if not parts:
            raise MeshLoadError(f"{path}: truncated face data at record {i}")
        if int(parts[0]) != 3 or len(parts) < 4:
            raise MeshLoadError(f"{path}: non-triangle face at record {i}")
        out[i] = [int(parts[1]), int(parts[2]), int(parts[3])]
    return out


def _skip_ply_element(fh, path, count, props, binary):
    if not binary:
        for _ in range(count):
            fh.readline()
        return
    if any(isinstance(p[1], tuple) for p in props):
        raise MeshLoadError(
            f"{path}: cannot skip binary element with list properties")
    size = sum(np.dtype(_PLY_SCALAR[t]).itemsize for _, t in props)
    fh.seek(size * count, 1)


# ---------------------------------------------------------------------------
# Normalization and derived geometry
# ---------------------------------------------------------------------------

def normalize_unit_diag(mesh: TriangleMesh):
    """Rescale isotropically about the AABB center so the diagonal is 1.

    Returns ``(mesh, scale)`` with ``scale = 1 / original diagonal``.
    Idempotent: a unit-diagonal mesh comes back with scale 1 and vertices
    untouched. Derived fields are dropped; recompute them afterwards.
    """
    if mesh.diag <= 0.0:
        raise ValueError("degenerate AABB (diag = 0)")
    scale = 1.0 / mesh.diag
    if scale == 1.0:
        return TriangleMesh(mesh.vertices, mesh.faces), scale
    center = mesh.aabb_center
    vertices = center + (mesh.vertices - center) * scale
    return TriangleMesh(vertices, mesh.faces), scale


def compute_face_normals(mesh: TriangleMesh) -> TriangleMesh:
    """Populate unit face normals, centroids, and the degenerate-face flags.

    Normals follow the counter-clockwise winding convention; zero-area
    faces get a zero normal and are flagged.
    """
    tri = mesh.vertices[mesh.faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.linalg.norm(cross, axis=1)
    degenerate = norm <= DEGENERATE_AREA_EPS
    safe = np.where(degenerate, 1.0, norm)
    normals = cross / safe[:, None]
    normals[degenerate] = 0.0
    mesh.face_normals = normals
    mesh.face_centroids = tri.mean(axis=1)
    mesh.degenerate_faces = degenerate
    if degenerate.any():
        logger.info("flagged %d degenerate (zero-area) faces",
                    int(degenerate.sum()))
    return mesh


def build_adjacency(mesh: TriangleMesh, step_sample_count: int = 10000,
                    seed: int = 0) -> AdjacencyIndex:
    """Build the edge-sharing face graph and vertex incidence structures.

    Non-manifold edges (more than two incident faces) make all sharers
    mutually adjacent so diffusion can still propagate. ``avg_step`` is
    estimated from up to ``step_sample_count`` uniformly sampled adjacent
    pairs with a seeded RNG (exact mean when the pair count is smaller).
    """
    if mesh.face_centroids is None:
        compute_face_normals(mesh)
    faces = mesh.faces
    nf = len(faces)
    nv = len(mesh.vertices)

    # All directed half-edges, keyed by the sorted vertex pair.
    edges = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]],
                            faces[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    owner = np.tile(np.arange(nf, dtype=np.int64), 3)
    edge_key = edges[:, 0] * np.int64(nv) + edges[:, 1]
    order = np.argsort(edge_key, kind="stable")
    sorted_key = edge_key[order]
    sorted_owner = owner[order]
    group_start = np.nonzero(
        np.concatenate([[True], sorted_key[1:] != sorted_key[:-1]]))[0]
    group_end = np.concatenate([group_start[1:], [len(sorted_key)]])
    sizes = group_end - group_start

    pair_a = []
    pair_b = []
    # Manifold edges (2 sharers) dominate; handle them vectorized.
    two = np.nonzero(sizes == 2)[0]
    if two.size:
        s = group_start[two]
        pair_a.append(sorted_owner[s])
        pair_b.append(sorted_owner[s + 1])
    # Non-manifold: all sharers become mutually adjacent.
    for gi in np.nonzero(sizes > 2)[0]:
        members = sorted_owner[group_start[gi]:group_end[gi]]
        ii, jj = np.triu_indices(len(members), k=1)
        pair_a.append(members[ii])
        pair_b.append(members[jj])

    if pair_a:
        a = np.concatenate(pair_a)
        b = np.concatenate(pair_b)
        lo = np.minimum(a, b)
        hi = np.maximum(a, b)
        # Faces sharing two edges would otherwise appear twice.
        uniq = np.unique(lo * np.int64(nf) + hi)
        lo = (uniq // nf).astype(np.int64)
        hi = (uniq % nf).astype(np.int64)
    else:
        lo = hi = np.empty(0, dtype=np.int64)

    centroids = mesh.face_centroids
    step = np.linalg.norm(centroids[lo] - centroids[hi], axis=1)

    # Symmetric CSR over both directions.
    src = np.concatenate([lo, hi])
    dst = np.concatenate([hi, lo])
    wts = np.concatenate([step, step])
    csr_order = np.argsort(src, kind="stable")
    face_indices = dst[csr_order]
    face_step = wts[csr_order]
    face_indptr = np.zeros(nf + 1, dtype=np.int64)
    np.add.at(face_indptr, src + 1, 1)
    face_indptr = np.cumsum(face_indptr)

    # Vertex -> incident faces.
    vf_v = faces.ravel()
    vf_f = np.repeat(np.arange(nf, dtype=np.int64), 3)
    vo = np.argsort(vf_v, kind="stable")
    vert_face_indices = vf_f[vo]
    vert_face_indptr = np.zeros(nv + 1, dtype=np.int64)
    np.add.at(vert_face_indptr, vf_v + 1, 1)
    vert_face_indptr = np.cumsum(vert_face_indptr)

    # Vertex one-rings from the unique undirected edge set.
    uniq_edges = np.unique(edge_key)
    ev0 = (uniq_edges // nv).astype(np.int64)
    ev1 = (uniq_edges % nv).astype(np.int64)
    vv_src = np.concatenate([ev0, ev1])
    vv_dst = np.concatenate([ev1, ev0])
    vvo = np.argsort(vv_src, kind="stable")
    vert_vert_indices = vv_dst[vvo]
    vert_vert_indptr = np.zeros(nv + 1, dtype=np.int64)
    np.add.at(vert_vert_indptr, vv_src + 1, 1)
    vert_vert_indptr = np.cumsum(vert_vert_indptr)

    n_pairs = len(lo)
    if n_pairs == 0:
        avg_step = 0.0
    elif n_pairs <= step_sample_count:
        avg_step = float(step.mean())
    else:
        rng = np.random.default_rng(seed)
        pick = rng.choice(n_pairs, size=step_sample_count, replace=False)
        avg_step = float(step[pick].mean())

    return AdjacencyIndex(
        n_faces=nf, n_vertices=nv,
        face_indptr=face_indptr,
        face_indices=np.ascontiguousarray(face_indices),
        face_step=np.ascontiguousarray(face_step),
        vert_face_indptr=vert_face_indptr,
        vert_face_indices=np.ascontiguousarray(vert_face_indices),
        vert_vert_indptr=vert_vert_indptr,
        vert_vert_indices=np.ascontiguousarray(vert_vert_indices),
        avg_step=avg_step,
    )


def connected_components(adj: AdjacencyIndex) -> np.ndarray:
    """Per-face component labels over the edge-sharing face graph."""
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import connected_components as _cc

    n = adj.n_faces
    mat = csr_matrix(
        (np.ones(len(adj.face_indices), dtype=np.int8),
         adj.face_indices, adj.face_indptr),
        shape=(n, n))
    _, labels = _cc(mat, directed=False)
    return labels.astype(np.int64)


# ---------------------------------------------------------------------------
# PLY export
# ---------------------------------------------------------------------------

def save_ply(mesh: TriangleMesh, path, vertex_rgb: Optional[np.ndarray] = None,
             comments: tuple = (), binary: bool = True) -> None:
    """Write the mesh as PLY, optionally with per-vertex uchar RGB.

    Positions are emitted as float32 (the common viewer expectation);
    ``comments`` land in the header.
    """
    v = mesh.vertices.astype("<f4")
    f = mesh.faces.astype("<i4")
    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0"]
    for c in comments:
        header.append(f"comment {c}")
    header += [f"element vertex {len(v)}",
               "property float x", "property float y", "property float z"]
    if vertex_rgb is not None:
        vertex_rgb = np.asarray(vertex_rgb, dtype=np.uint8)
        if vertex_rgb.shape != (len(v), 3):
            raise ValueError("vertex_rgb must be (V, 3) uint8")
        header += ["property uchar red", "property uchar green",
                   "property uchar blue"]
    header += [f"element face {len(f)}",
               "property list uchar int vertex_indices", "end_header"]

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            if vertex_rgb is None:
                fh.write(v.tobytes())
            else:
                dt = np.dtype([("xyz", "<f4", (3,)), ("rgb", "u1", (3,))])
                rec = np.empty(len(v), dtype=dt)
                rec["xyz"] = v
                rec["rgb"] = vertex_rgb
                fh.write(rec.tobytes())
            rec = np.empty(len(f), dtype=[("n", "u1"), ("idx", "<i4", (3,))])
            rec["n"] = 3
            rec["idx"] = f
            fh.write(rec.tobytes())
        else:
            for i in range(len(v)):
                line = f"{v[i, 0]:.9g} {v[i, 1]:.9g} {v[i, 2]:.9g}"
                if vertex_rgb is not None:
                    line += " {} {} {}".format(*vertex_rgb[i])
                fh.write((line + "\n").encode("ascii"))
            for i in range(len(f)):
                fh.write(f"3 {f[i, 0]} {f[i, 1]} {f[i, 2]}\n".encode("ascii"))
