"""Benchmark the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--faces 20000] [--rays 20000]
                                       [--sources 400]

Times the two hot paths on a jittered sphere: batch BVH nearest-hit casting
and truncated geodesic Gaussian accumulation. Results also sanity-check that
both backends agree.
"""

import argparse
import time

import numpy as np

from meshsal import (build_adjacency, build_ray_accel, cast_rays,
                     compute_face_normals, normalize_unit_diag)
from meshsal._kernels import load_backend
from meshsal.procedural import jittered, uv_sphere


def make_mesh(n_faces):
    n = max(4, int(round((n_faces / 2) ** 0.5)))
    mesh = jittered(uv_sphere(n, n), 0.001, seed=0)
    mesh, _ = normalize_unit_diag(mesh)
    compute_face_normals(mesh)
    return mesh


def make_rays(mesh, n, seed=1):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    origins = mesh.aabb_center + 2.0 * u
    targets = mesh.aabb_center + rng.uniform(-0.3, 0.3, size=(n, 3))
    dirs = targets - origins
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return origins, dirs


def bench(label, fn, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    print(f"  {label:<26s} {best * 1e3:10.1f} ms")
    return best, result


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--faces", type=int, default=20_000)
    ap.add_argument("--rays", type=int, default=20_000)
    ap.add_argument("--sources", type=int, default=400)
    ap.add_argument("--pure-repeats", type=int, default=1,
                    help="repeat count for the (slow) pure backend")
    args = ap.parse_args()

    try:
        compiled = load_backend("compiled")
    except ImportError:
        print("compiled extension not available; nothing to compare")
        return

    pure = load_backend("pure")
    mesh = make_mesh(args.faces)
    adj = build_adjacency(mesh)
    accel = build_ray_accel(mesh)
    origins, dirs = make_rays(mesh, args.rays)
    print(f"mesh: {mesh.n_faces} faces, {mesh.n_vertices} vertices; "
          f"BVH {accel.node_count} nodes depth {accel.depth}")

    print(f"\nBVH nearest-hit, {args.rays} rays")
    tc, (fc, _) = bench("compiled", lambda: cast_rays(
        accel, origins, dirs, backend=compiled))
    tp, (fp, _) = bench("pure", lambda: cast_rays(
        accel, origins, dirs, backend=pure), repeats=args.pure_repeats)
    assert np.array_equal(fc, fp), "backend mismatch"
    print(f"  speedup: {tp / tc:.1f}x   (hit rate "
          f"{(fc >= 0).mean() * 100:.1f}%)")

    rng = np.random.default_rng(5)
    sources = np.sort(rng.choice(mesh.n_faces, size=args.sources,
                                 replace=False)).astype(np.int64)
    weights = rng.integers(1, 8, size=args.sources).astype(np.float64)
    sigma, d_max = 0.02, 0.06
    hop_cap = int(np.ceil(d_max / adj.avg_step)) * 2

    def run_diffusion(impl):
        out = np.zeros(mesh.n_faces)
        impl.geodesic_accumulate(adj.face_indptr, adj.face_indices,
                                 adj.face_step, sources, weights, sigma,
                                 d_max, hop_cap, out)
        return out

    print(f"\ntruncated geodesic accumulation, {args.sources} sources")
    tc, oc = bench("compiled", lambda: run_diffusion(compiled))
    tp, op = bench("pure", lambda: run_diffusion(pure),
                   repeats=args.pure_repeats)
    np.testing.assert_allclose(oc, op, rtol=1e-12)
    print(f"  speedup: {tp / tc:.1f}x   "
          f"(touched {(oc > 0).sum()} faces)")


if __name__ == "__main__":
    main()
