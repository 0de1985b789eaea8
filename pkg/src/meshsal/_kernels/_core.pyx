# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled hot kernels: BVH nearest-hit traversal and truncated geodesic
Gaussian accumulation.

Semantics mirror meshsal._kernels.pure exactly (same epsilons, tie rules,
expansion cuts); keep the two in lockstep.
"""

from libc.math cimport exp, fabs, INFINITY

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double DET_EPS = 1e-14
cdef double BARY_EPS = 1e-9


cdef inline double _dmin(double a, double b) nogil:
    return a if a < b else b


cdef inline double _dmax(double a, double b) nogil:
    return a if a > b else b


def bvh_nearest_hits(double[:, ::1] node_min, double[:, ::1] node_max,
                     cnp.int64_t[::1] child_left, cnp.int64_t[::1] child_right,
                     cnp.int64_t[::1] leaf_start, cnp.int64_t[::1] leaf_count,
                     cnp.int64_t[::1] prim_order,
                     double[:, ::1] tri_v0, double[:, ::1] tri_e1,
                     double[:, ::1] tri_e2,
                     double[:, ::1] origins, double[:, ::1] dirs,
                     double t_eps):
    """Nearest ray-triangle hits through a flattened BVH.

    Returns (faces, ts); faces == -1 on miss, ties on t go to the lowest
    original face index.
    """
    cdef Py_ssize_t n_rays = origins.shape[0]
    faces_arr = np.full(n_rays, -1, dtype=np.int64)
    ts_arr = np.full(n_rays, np.inf)
    cdef cnp.int64_t[::1] out_face = faces_arr
    cdef double[::1] out_t = ts_arr

    cdef cnp.int64_t stack[128]
    cdef Py_ssize_t r, top, node, k, s, e
    cdef double ox, oy, oz, dx, dy, dz, ix, iy, iz
    cdef double t0, t1, lo, hi, t_near, t_far
    cdef double best_t, det, inv, u, v, t
    cdef double e1x, e1y, e1z, e2x, e2y, e2z
    cdef double px, py, pz, tx, ty, tz, qx, qy, qz
    cdef cnp.int64_t best_f, fid, cnt

    with nogil:
        for r in range(n_rays):
            ox = origins[r, 0]; oy = origins[r, 1]; oz = origins[r, 2]
            dx = dirs[r, 0]; dy = dirs[r, 1]; dz = dirs[r, 2]
            # Matches the pure backend's 1e-300 nudge for zero components.
            ix = 1.0 / (dx if dx != 0.0 else 1e-300)
            iy = 1.0 / (dy if dy != 0.0 else 1e-300)
            iz = 1.0 / (dz if dz != 0.0 else 1e-300)
            best_t = INFINITY
            best_f = -1
            stack[0] = 0
            top = 1
            while top > 0:
                top -= 1
                node = stack[top]
                t0 = (node_min[node, 0] - ox) * ix
                t1 = (node_max[node, 0] - ox) * ix
                lo = _dmin(t0, t1); hi = _dmax(t0, t1)
                t_near = _dmax(lo, 0.0); t_far = hi
                t0 = (node_min[node, 1] - oy) * iy
                t1 = (node_max[node, 1] - oy) * iy
                t_near = _dmax(t_near, _dmin(t0, t1))
                t_far = _dmin(t_far, _dmax(t0, t1))
                t0 = (node_min[node, 2] - oz) * iz
                t1 = (node_max[node, 2] - oz) * iz
                t_near = _dmax(t_near, _dmin(t0, t1))
                t_far = _dmin(t_far, _dmax(t0, t1))
                if t_near > t_far or t_near > best_t:
                    continue
                cnt = leaf_count[node]
                if cnt > 0:
                    s = leaf_start[node]
                    e = s + cnt
                    for k in range(s, e):
                        e1x = tri_e1[k, 0]; e1y = tri_e1[k, 1]; e1z = tri_e1[k, 2]
                        e2x = tri_e2[k, 0]; e2y = tri_e2[k, 1]; e2z = tri_e2[k, 2]
                        # Moller-Trumbore
                        px = dy * e2z - dz * e2y
                        py = dz * e2x - dx * e2z
                        pz = dx * e2y - dy * e2x
                        det = e1x * px + e1y * py + e1z * pz
                        if fabs(det) <= DET_EPS:
                            continue
                        inv = 1.0 / det
                        tx = ox - tri_v0[k, 0]
                        ty = oy - tri_v0[k, 1]
                        tz = oz - tri_v0[k, 2]
                        u = (tx * px + ty * py + tz * pz) * inv
                        if u < -BARY_EPS or u > 1.0 + BARY_EPS:
                            continue
                        qx = ty * e1z - tz * e1y
                        qy = tz * e1x - tx * e1z
                        qz = tx * e1y - ty * e1x
                        v = (dx * qx + dy * qy + dz * qz) * inv
                        if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
                            continue
                        t = (e2x * qx + e2y * qy + e2z * qz) * inv
                        if t <= t_eps:
                            continue
                        fid = prim_order[k]
                        if t < best_t or (t == best_t and fid < best_f):
                            best_t = t
                            best_f = fid
                else:
                    stack[top] = child_left[node]
                    stack[top + 1] = child_right[node]
                    top += 2
            out_face[r] = best_f
            if best_f >= 0:
                out_t[r] = best_t
    return faces_arr, ts_arr


cdef inline void _heap_push(double* hd, cnp.int64_t* hf, cnp.int32_t* hh,
                            Py_ssize_t* size, double d, cnp.int64_t f,
                            cnp.int32_t h) nogil:
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t p
    cdef double td
    cdef cnp.int64_t tf
    cdef cnp.int32_t th
    hd[i] = d; hf[i] = f; hh[i] = h
    size[0] += 1
    while i > 0:
        p = (i - 1) >> 1
        if hd[p] < hd[i] or (hd[p] == hd[i] and hf[p] <= hf[i]):
            break
        td = hd[p]; hd[p] = hd[i]; hd[i] = td
        tf = hf[p]; hf[p] = hf[i]; hf[i] = tf
        th = hh[p]; hh[p] = hh[i]; hh[i] = th
        i = p


cdef inline void _heap_pop(double* hd, cnp.int64_t* hf, cnp.int32_t* hh,
                           Py_ssize_t* size) nogil:
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t n, c
    cdef double td
    cdef cnp.int64_t tf
    cdef cnp.int32_t th
    size[0] -= 1
    n = size[0]
    hd[0] = hd[n]; hf[0] = hf[n]; hh[0] = hh[n]
    while True:
        c = 2 * i + 1
        if c >= n:
            break
        if c + 1 < n and (hd[c + 1] < hd[c] or
                          (hd[c + 1] == hd[c] and hf[c + 1] < hf[c])):
            c += 1
        if hd[i] < hd[c] or (hd[i] == hd[c] and hf[i] <= hf[c]):
            break
        td = hd[i]; hd[i] = hd[c]; hd[c] = td
        tf = hf[i]; hf[i] = hf[c]; hf[c] = tf
        th = hh[i]; hh[i] = hh[c]; hh[c] = th
        i = c


def geodesic_accumulate(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                        double[::1] weights,
                        cnp.int64_t[::1] sources, double[::1] source_w,
                        double sigma, double d_max, cnp.int64_t hop_cap,
                        double[::1] out):
    """Add truncated Gaussian contributions from each source face to ``out``.

    Per source: Dijkstra expansion over the face adjacency CSR, cut at
    accumulated distance > d_max and at hop depth >= hop_cap.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t n_src = sources.shape[0]
    cdef Py_ssize_t cap = indices.shape[0] + 1
    cdef double inv_two_s2 = 1.0 / (2.0 * sigma * sigma)

    dist_arr = np.empty(n)
    stamp_arr = np.full(n, -1, dtype=np.int64)
    hd_arr = np.empty(cap)
    hf_arr = np.empty(cap, dtype=np.int64)
    hh_arr = np.empty(cap, dtype=np.int32)
    cdef double[::1] dist = dist_arr
    cdef cnp.int64_t[::1] stamp = stamp_arr
    cdef double[::1] hd_mv = hd_arr
    cdef cnp.int64_t[::1] hf_mv = hf_arr
    cdef cnp.int32_t[::1] hh_mv = hh_arr
    cdef double* hd = &hd_mv[0]
    cdef cnp.int64_t* hf = &hf_mv[0]
    cdef cnp.int32_t* hh = &hh_mv[0]

    cdef Py_ssize_t si, k, heap_size
    cdef cnp.int64_t src, f, g, open_mark, done_mark
    cdef cnp.int32_t h
    cdef double w, d, nd

    with nogil:
        for si in range(n_src):
            src = sources[si]
            w = source_w[si]
            open_mark = 2 * si
            done_mark = 2 * si + 1
            dist[src] = 0.0
            stamp[src] = open_mark
            heap_size = 0
            _heap_push(hd, hf, hh, &heap_size, 0.0, src, 0)
            while heap_size > 0:
                d = hd[0]; f = hf[0]; h = hh[0]
                _heap_pop(hd, hf, hh, &heap_size)
                if stamp[f] != open_mark or d > dist[f]:
                    continue
                stamp[f] = done_mark
                out[f] += w * exp(-d * d * inv_two_s2)
                if h >= hop_cap:
                    continue
                for k in range(indptr[f], indptr[f + 1]):
                    g = indices[k]
                    nd = d + weights[k]
                    if nd > d_max or stamp[g] == done_mark:
                        continue
                    if stamp[g] == open_mark and nd >= dist[g]:
                        continue
                    dist[g] = nd
                    stamp[g] = open_mark
                    _heap_push(hd, hf, hh, &heap_size, nd, g, h + 1)
    return np.asarray(out)


def geodesic_distances(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices,
                       double[::1] weights, cnp.int64_t source,
                       double d_max, cnp.int64_t hop_cap):
    """Truncated single-source distances on the face adjacency graph."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t cap = indices.shape[0] + 1

    dist_arr = np.empty(n)
    stamp_arr = np.zeros(n, dtype=np.int8)  # 0 untouched, 1 open, 2 final
    of_arr = np.empty(n, dtype=np.int64)
    od_arr = np.empty(n)
    hd_arr = np.empty(cap)
    hf_arr = np.empty(cap, dtype=np.int64)
    hh_arr = np.empty(cap, dtype=np.int32)
    cdef double[::1] dist = dist_arr
    cdef cnp.int8_t[::1] stamp = stamp_arr
    cdef cnp.int64_t[::1] out_f = of_arr
    cdef double[::1] out_d = od_arr
    cdef double[::1] hd_mv = hd_arr
    cdef cnp.int64_t[::1] hf_mv = hf_arr
    cdef cnp.int32_t[::1] hh_mv = hh_arr
    cdef double* hd = &hd_mv[0]
    cdef cnp.int64_t* hf = &hf_mv[0]
    cdef cnp.int32_t* hh = &hh_mv[0]

    cdef Py_ssize_t k, heap_size, n_out = 0
    cdef cnp.int64_t f, g
    cdef cnp.int32_t h
    cdef double d, nd

    dist[source] = 0.0
    stamp[source] = 1
    heap_size = 0
    with nogil:
        _heap_push(hd, hf, hh, &heap_size, 0.0, source, 0)
        while heap_size > 0:
            d = hd[0]; f = hf[0]; h = hh[0]
            _heap_pop(hd, hf, hh, &heap_size)
            if stamp[f] == 2 or d > dist[f]:
                continue
            stamp[f] = 2
            out_f[n_out] = f
            out_d[n_out] = d
            n_out += 1
            if h >= hop_cap:
                continue
            for k in range(indptr[f], indptr[f + 1]):
                g = indices[k]
                nd = d + weights[k]
                if nd > d_max or stamp[g] == 2:
                    continue
                if stamp[g] == 1 and nd >= dist[g]:
                    continue
                dist[g] = nd
                stamp[g] = 1
                _heap_push(hd, hf, hh, &heap_size, nd, g, h + 1)
    return of_arr[:n_out].copy(), od_arr[:n_out].copy()
