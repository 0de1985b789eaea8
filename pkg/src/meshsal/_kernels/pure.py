"""Pure-Python reference kernels.

Functionally identical to the Cython backend but one to two orders of
magnitude slower on large inputs (see benchmarks/bench_kernels.py). Keep the
two implementations in lockstep: same epsilons, same tie-breaking, same
traversal and expansion rules.
"""

import heapq
import math

import numpy as np

# Shared intersection constants. DET_EPS rejects near-parallel / degenerate
# triangles, BARY_EPS accepts hits within a hair of an edge so that shared
# edges are hit by both incident faces (ties then resolve by face index).
DET_EPS = 1e-14
BARY_EPS = 1e-9


def bvh_nearest_hits(node_min, node_max, child_left, child_right,
                     leaf_start, leaf_count, prim_order,
                     tri_v0, tri_e1, tri_e2,
                     origins, dirs, t_eps):
    """Nearest ray-triangle hits through a flattened BVH.

    Triangles must be pre-ordered so that each leaf covers the contiguous
    slot range [leaf_start, leaf_start + leaf_count); ``prim_order[slot]``
    maps back to the original face index. Ties on t go to the lowest
    original face index. Returns (faces, ts) with faces == -1 on miss.
    """
    n_rays = origins.shape[0]
    out_face = np.full(n_rays, -1, dtype=np.int64)
    out_t = np.full(n_rays, np.inf)

    stack = np.empty(128, dtype=np.int64)
    with np.errstate(divide="ignore", over="ignore"):
        for r in range(n_rays):
            o = origins[r]
            d = dirs[r]
            # Zero direction components get nudged for the slab test only,
            # so 0 * inf never produces NaN; an on-boundary origin then
            # conservatively passes, which merely visits the node.
            inv_d = 1.0 / np.where(d == 0.0, 1e-300, d)
            best_t = np.inf
            best_f = -1
            stack[0] = 0
            top = 1
            while top > 0:
                top -= 1
                node = stack[top]
                t0 = (node_min[node] - o) * inv_d
                t1 = (node_max[node] - o) * inv_d
                lo = np.minimum(t0, t1)
                hi = np.maximum(t0, t1)
                t_near = max(lo[0], lo[1], lo[2], 0.0)
                t_far = min(hi[0], hi[1], hi[2])
                if t_near > t_far or t_near > best_t:
                    continue
                cnt = leaf_count[node]
                if cnt > 0:
                    s = leaf_start[node]
                    f, t = _leaf_hit(tri_v0, tri_e1, tri_e2, prim_order,
                                     s, s + cnt, o, d, t_eps, best_t, best_f)
                    best_f, best_t = f, t
                else:
                    stack[top] = child_left[node]
                    stack[top + 1] = child_right[node]
                    top += 2
            if best_f >= 0:
                out_face[r] = best_f
                out_t[r] = best_t
    return out_face, out_t


def _leaf_hit(tri_v0, tri_e1, tri_e2, prim_order, s, e, o, d,
              t_eps, best_t, best_f):
    """Moller-Trumbore over one leaf's triangle slots, vectorized."""
    v0 = tri_v0[s:e]
    e1 = tri_e1[s:e]
    e2 = tri_e2[s:e]
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
    ok &= t > t_eps
    for i in np.nonzero(ok)[0]:
        ti = t[i]
        fi = prim_order[s + i]
        if ti < best_t or (ti == best_t and fi < best_f):
            best_t = ti
            best_f = fi
    return best_f, best_t


def geodesic_accumulate(indptr, indices, weights, sources, source_w,
                        sigma, d_max, hop_cap, out):
    """Add truncated Gaussian contributions from each source face to ``out``.

    Per source: uniform-cost (Dijkstra) expansion over the face adjacency
    CSR, accumulating edge lengths; expansion is cut at accumulated distance
    > d_max and at hop depth >= hop_cap. Every face finalized at distance
    d <= d_max receives source_w * exp(-d^2 / (2 sigma^2)).
    """
    n = indptr.shape[0] - 1
    inv_two_s2 = 1.0 / (2.0 * sigma * sigma)
    dist = np.empty(n)
    # Per-source stamps avoid an O(n) reset per source: 2*si marks a face
    # opened in round si, 2*si+1 finalized; -1 is never touched.
    stamp = np.full(n, -1, dtype=np.int64)
    for si in range(sources.shape[0]):
        src = int(sources[si])
        w = float(source_w[si])
        open_mark = 2 * si
        done_mark = 2 * si + 1
        dist[src] = 0.0
        stamp[src] = open_mark
        heap = [(0.0, src, 0)]
        while heap:
            d, f, h = heapq.heappop(heap)
            if stamp[f] != open_mark or d > dist[f]:
                continue  # stale entry
            stamp[f] = done_mark
            out[f] += w * math.exp(-d * d * inv_two_s2)
            if h >= hop_cap:
                continue
            for k in range(indptr[f], indptr[f + 1]):
                g = int(indices[k])
                nd = d + weights[k]
                if nd > d_max or stamp[g] == done_mark:
                    continue
                if stamp[g] == open_mark and nd >= dist[g]:
                    continue
                dist[g] = nd
                stamp[g] = open_mark
                heapq.heappush(heap, (nd, g, h + 1))
    return out


def geodesic_distances(indptr, indices, weights, source, d_max, hop_cap):
    """Truncated single-source distances on the face adjacency graph.

    Returns (faces, dists): every face whose shortest path (within the hop
    cap) accumulates to <= d_max, the source itself at distance 0.
    """
    n = indptr.shape[0] - 1
    dist = np.empty(n)
    stamp = np.zeros(n, dtype=np.int8)  # 0 untouched, 1 open, 2 final
    out_f = []
    out_d = []
    dist[source] = 0.0
    stamp[source] = 1
    heap = [(0.0, int(source), 0)]
    while heap:
        d, f, h = heapq.heappop(heap)
        if stamp[f] == 2 or d > dist[f]:
            continue
        stamp[f] = 2
        out_f.append(f)
        out_d.append(d)
        if h >= hop_cap:
            continue
        for k in range(indptr[f], indptr[f + 1]):
            g = int(indices[k])
            nd = d + weights[k]
            if nd > d_max or stamp[g] == 2:
                continue
            if stamp[g] == 1 and nd >= dist[g]:
                continue
            dist[g] = nd
            stamp[g] = 1
            heapq.heappush(heap, (nd, g, h + 1))
    return np.asarray(out_f, dtype=np.int64), np.asarray(out_d)
