"""Independent oracles the tests check the pipeline against.

These deliberately avoid the library's kernel code paths: ray queries are
verified against a vectorized all-faces scan, geodesic diffusion against
scipy's exact Dijkstra, components against union-find.
"""

import numpy as np

# Contract constants for the nearest-hit query (restated from the module
# docs, not imported, so the oracle stays an independent route).
T_EPS = 1e-7
DET_EPS = 1e-14
BARY_EPS = 1e-9


def brute_force_nearest_hit(mesh, origin, direction):
    """Minimum-t scan over every face. Returns (face, t) or (-1, inf)."""
    tri = mesh.vertices[mesh.faces]
    v0 = tri[:, 0]
    e1 = tri[:, 1] - v0
    e2 = tri[:, 2] - v0
    d = np.asarray(direction, dtype=np.float64)
    o = np.asarray(origin, dtype=np.float64)
    pvec = np.cross(np.broadcast_to(d, e2.shape), e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > DET_EPS
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = o - v0
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    ok &= (u >= -BARY_EPS) & (u <= 1.0 + BARY_EPS)
    qvec = np.cross(tvec, e1)
    v = np.einsum("j,ij->i", d, qvec) * inv
    ok &= (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS)
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    ok &= t > T_EPS
    if not ok.any():
        return -1, np.inf
    hits = np.nonzero(ok)[0]
    ts = t[hits]
    best = np.lexsort((hits, ts))[0]  # min t, ties to lowest face index
    return int(hits[best]), float(ts[best])


def adjacency_graph_csr(adj):
    """scipy CSR matrix of the face graph with centroid-step edge weights."""
    from scipy.sparse import csr_matrix

    n = adj.n_faces
    return csr_matrix((adj.face_step, adj.face_indices, adj.face_indptr),
                      shape=(n, n))


def dijkstra_kernel_sum(adj, raw_values, sigma, d_max):
    """Exact-Dijkstra brute-force diffusion: per-source full shortest paths
    truncated at d_max, double loop over (source, face)."""
    from scipy.sparse.csgraph import dijkstra

    graph = adjacency_graph_csr(adj)
    sources = np.nonzero(raw_values)[0]
    out = np.zeros(adj.n_faces)
    if sources.size == 0:
        return out
    dist = dijkstra(graph, directed=False, indices=sources, limit=d_max)
    for row, s in enumerate(sources):
        reach = np.isfinite(dist[row])
        d = dist[row][reach]
        out[reach] += raw_values[s] * np.exp(-d * d / (2.0 * sigma * sigma))
    return out


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def union_find_components(adj):
    """Component labels by union-find over the adjacency lists."""
    uf = UnionFind(adj.n_faces)
    for f in range(adj.n_faces):
        for g in adj.adjacent_faces(f):
            uf.union(f, int(g))
    roots = {}
    labels = np.empty(adj.n_faces, dtype=np.int64)
    for f in range(adj.n_faces):
        r = uf.find(f)
        labels[f] = roots.setdefault(r, len(roots))
    return labels
