import logging
import math

import numpy as np
import pytest

from helpers_oracle import dijkstra_kernel_sum
from meshsal import (DiffusionConfig, FaceField, SmoothConfig, TriangleMesh,
                     VertexField, build_adjacency, compute_face_normals,
                     diffuse, face_to_vertex, finalize, laplacian_smooth,
                     run_pipeline, truncated_geodesic_field)
from meshsal.colormap import get_colormap
from meshsal.procedural import (grid_patch, icosphere, jittered,
                                parallel_planes, unit_cube)
from meshsal.sampling import HitLog


def impulse(n, idx, value=1.0):
    v = np.zeros(n)
    v[idx] = value
    return FaceField(v, stage="raw")


def prepared(mesh):
    compute_face_normals(mesh)
    return mesh, build_adjacency(mesh)


class TestTruncatedGeodesicField:
    def test_source_distance_zero(self):
        mesh, adj = prepared(icosphere(1, radius=0.5))
        d = truncated_geodesic_field(mesh, adj, 7, 0.2)
        assert d[7] == 0.0

    def test_single_step(self):
        mesh, adj = prepared(grid_patch(1, 1, size=0.03))
        # the two triangles share the cell diagonal; centroid distance is
        # size * sqrt(2) / 3
        want = 0.03 * math.sqrt(2.0) / 3.0
        d = truncated_geodesic_field(mesh, adj, 0, 0.06)
        assert d[1] == pytest.approx(want, rel=1e-12)

    def test_other_component_unreachable(self):
        mesh, adj = prepared(parallel_planes(n=4, gap=0.01))
        half = mesh.n_faces // 2
        d = truncated_geodesic_field(mesh, adj, 0, 10.0)
        assert all(f < half for f in d)

    def test_all_within_d_max(self):
        mesh, adj = prepared(icosphere(2, radius=0.5))
        d_max = 0.06
        d = truncated_geodesic_field(mesh, adj, 0, d_max)
        assert max(d.values()) <= d_max

    def test_matches_scipy_dijkstra(self):
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import dijkstra

        mesh, adj = prepared(jittered(icosphere(2, radius=0.5), 0.003, seed=1))
        graph = csr_matrix((adj.face_step, adj.face_indices, adj.face_indptr),
                           shape=(adj.n_faces, adj.n_faces))
        d_max = 0.1
        got = truncated_geodesic_field(mesh, adj, 11, d_max)
        want = dijkstra(graph, directed=False, indices=11, limit=d_max)
        reach = np.nonzero(np.isfinite(want))[0]
        assert set(got) == set(int(i) for i in reach)
        for f in reach:
            assert got[int(f)] == pytest.approx(want[f], rel=1e-12)


class TestDiffuse:
    def test_impulse_value_at_source(self):
        mesh, adj = prepared(icosphere(1, radius=0.5))
        out = diffuse(impulse(mesh.n_faces, 3), mesh, adj, DiffusionConfig())
        assert out.values[3] == pytest.approx(1.0, abs=1e-15)
        assert out.stage == "diffused"

    def test_value_at_sigma_distance(self):
        # scale the two-triangle cell so the centroid step is exactly sigma
        sigma = 0.02
        cell = sigma * 3.0 / math.sqrt(2.0)
        mesh, adj = prepared(grid_patch(1, 1, size=cell))
        out = diffuse(impulse(2, 0), mesh, adj, DiffusionConfig(sigma=sigma))
        assert out.values[1] == pytest.approx(math.exp(-0.5), rel=1e-9)

    def test_gap_leakage(self):
        # disconnected parallel planes 0.03 apart: geodesic keeps the far
        # plane at exactly zero, euclidean leaks with the closed-form value
        mesh, adj = prepared(parallel_planes(n=10, gap=0.03))
        half = mesh.n_faces // 2
        raw = impulse(mesh.n_faces, 55)
        cfg_g = DiffusionConfig(sigma=0.02, metric="geodesic")
        cfg_e = DiffusionConfig(sigma=0.02, metric="euclidean")
        geo = diffuse(raw, mesh, adj, cfg_g)
        euc = diffuse(raw, mesh, adj, cfg_e)
        assert (geo.values[half:] == 0.0).all()
        leak = euc.values[half:].max()
        want = math.exp(-0.03 ** 2 / (2 * 0.02 ** 2))
        assert leak == pytest.approx(want, abs=1e-3)
        assert leak >= 0.32

    @pytest.mark.parametrize("seed,factory", [
        (0, lambda: jittered(icosphere(2, radius=0.5), 0.002, seed=10)),
        (1, lambda: jittered(grid_patch(12, 12, size=1.0), 0.01, seed=11)),
        (2, lambda: jittered(icosphere(1, radius=0.3), 0.004, seed=12)),
        (3, lambda: parallel_planes(n=7, gap=0.02)),
        (4, lambda: unit_cube()),
    ])
    def test_matches_dijkstra_oracle(self, seed, factory):
        mesh = factory()
        assert mesh.n_faces <= 500
        mesh, adj = prepared(mesh)
        rng = np.random.default_rng(seed)
        raw = np.zeros(mesh.n_faces)
        hits = rng.choice(mesh.n_faces, size=max(2, mesh.n_faces // 20),
                          replace=False)
        raw[hits] = rng.integers(1, 5, size=len(hits)).astype(float)
        cfg = DiffusionConfig(sigma=0.02)
        got = diffuse(FaceField(raw, stage="raw"), mesh, adj, cfg).values
        want = dijkstra_kernel_sum(adj, raw, cfg.sigma, cfg.d_max)
        np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-300)

    def test_truncation_exact_zero(self):
        mesh, adj = prepared(grid_patch(30, 2, size=1.0))
        cfg = DiffusionConfig(sigma=0.005)
        out = diffuse(impulse(mesh.n_faces, 0), mesh, adj, cfg).values
        d = truncated_geodesic_field(mesh, adj, 0, cfg.d_max)
        inside = np.zeros(mesh.n_faces, dtype=bool)
        inside[list(d)] = True
        assert (out[~inside] == 0.0).all()
        assert (out[inside] > 0.0).all()

    def test_monotone_in_distance(self):
        from scipy.sparse import csr_matrix
        from scipy.sparse.csgraph import dijkstra

        mesh, adj = prepared(icosphere(2, radius=0.5))
        cfg = DiffusionConfig(sigma=0.05)
        out = diffuse(impulse(mesh.n_faces, 40), mesh, adj, cfg).values
        graph = csr_matrix((adj.face_step, adj.face_indices, adj.face_indptr),
                           shape=(adj.n_faces, adj.n_faces))
        dist = dijkstra(graph, directed=False, indices=40)
        order = np.argsort(dist, kind="stable")
        vals = out[order]
        assert (np.diff(vals) <= 1e-15).all()

    def test_hopcount_neighbor_value(self):
        mesh, adj = prepared(grid_patch(1, 1, size=1.0))
        cfg = DiffusionConfig(sigma=0.02, metric="hopcount", hop_sigma=2.0)
        out = diffuse(impulse(2, 0), mesh, adj, cfg).values
        assert out[0] == pytest.approx(1.0)
        assert out[1] == pytest.approx(math.exp(-1.0 / (2 * 4.0)), rel=1e-12)

    def test_threads_deterministic(self):
        mesh, adj = prepared(icosphere(2, radius=0.5))
        rng = np.random.default_rng(5)
        raw = FaceField(rng.poisson(0.3, mesh.n_faces).astype(float),
                        stage="raw")
        cfg = DiffusionConfig(sigma=0.03)
        serial = diffuse(raw, mesh, adj, cfg, threads=1).values
        threaded = diffuse(raw, mesh, adj, cfg, threads=4).values
        np.testing.assert_allclose(serial, threaded, rtol=1e-12)

    def test_empty_raw(self):
        mesh, adj = prepared(unit_cube())
        out = diffuse(impulse(12, 0, value=0.0), mesh, adj, DiffusionConfig())
        np.testing.assert_array_equal(out.values, np.zeros(12))


class TestFaceToVertex:
    def test_mean(self):
        # vertex 0 belongs to faces 0, 1, 2 with values 1, 2, 3
        v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [-1, 0, 0],
                      [0, -1, 0]], float)
        f = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 4]])
        mesh, adj = prepared(TriangleMesh(v, f))
        field = FaceField(np.array([1.0, 2.0, 3.0]), stage="diffused")
        out = face_to_vertex(field, adj)
        assert out.values[0] == pytest.approx(2.0)
        assert out.values[1] == pytest.approx(1.0)

    def test_constant_preserved(self):
        mesh, adj = prepared(icosphere(1, radius=0.5))
        field = FaceField(np.full(mesh.n_faces, 3.25), stage="diffused")
        np.testing.assert_allclose(face_to_vertex(field, adj).values, 3.25)

    def test_isolated_vertex_zero(self, caplog):
        v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [9, 9, 9]], float)
        f = np.array([[0, 1, 2]])
        mesh, adj = prepared(TriangleMesh(v, f))
        with caplog.at_level(logging.INFO, logger="meshsal.diffusion"):
            out = face_to_vertex(FaceField(np.array([5.0]), stage="diffused"),
                                 adj)
        assert out.values[3] == 0.0
        assert any("isolated" in r.message for r in caplog.records)

    def test_linear(self):
        mesh, adj = prepared(icosphere(1, radius=0.5))
        rng = np.random.default_rng(2)
        x = rng.normal(size=mesh.n_faces)
        y = rng.normal(size=mesh.n_faces)
        fx = face_to_vertex(FaceField(x, stage="diffused"), adj).values
        fy = face_to_vertex(FaceField(y, stage="diffused"), adj).values
        fxy = face_to_vertex(FaceField(2 * x - 3 * y, stage="diffused"),
                             adj).values
        np.testing.assert_allclose(fxy, 2 * fx - 3 * fy, atol=1e-12)


class TestLaplacianSmooth:
    def test_zero_iterations_identity(self):
        mesh, adj = prepared(icosphere(1, radius=0.5))
        rng = np.random.default_rng(0)
        x = rng.normal(size=mesh.n_vertices)
        out = laplacian_smooth(VertexField(x, stage="diffused"), adj,
                               SmoothConfig(iterations=0))
        np.testing.assert_array_equal(out.values, x)
        assert out.stage == "smoothed"

    def test_single_step_center(self):
        # vertex 0 at value 0, every neighbor at 1, blend 0.5: one step
        # moves the center to 0.5
        mesh, adj = prepared(icosphere(0, radius=0.5))
        x = np.ones(mesh.n_vertices)
        x[0] = 0.0
        out = laplacian_smooth(VertexField(x, stage="diffused"), adj,
                               SmoothConfig(blend=0.5, iterations=1))
        assert out.values[0] == pytest.approx(0.5, abs=1e-12)

    def test_constant_fixed_point(self):
        mesh, adj = prepared(icosphere(1, radius=0.5))
        x = np.full(mesh.n_vertices, 0.7)
        for blend, k in ((0.0, 3), (0.5, 5), (1.0, 2)):
            out = laplacian_smooth(VertexField(x, stage="diffused"), adj,
                                   SmoothConfig(blend=blend, iterations=k))
            np.testing.assert_allclose(out.values, 0.7, atol=1e-12)

    def test_max_principle(self):
        mesh, adj = prepared(jittered(icosphere(1, radius=0.5), 0.01, seed=1))
        rng = np.random.default_rng(42)
        cfg = SmoothConfig(blend=0.7, iterations=1)
        for _ in range(200):
            x = rng.normal(size=mesh.n_vertices)
            cur = VertexField(x, stage="diffused")
            for _ in range(3):
                nxt = laplacian_smooth(
                    VertexField(cur.values, stage="diffused"), adj, cfg)
                assert nxt.values.min() >= cur.values.min() - 1e-12
                assert nxt.values.max() <= cur.values.max() + 1e-12
                cur = nxt

    def test_isolated_vertex_fixed(self):
        v = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [9, 9, 9]], float)
        f = np.array([[0, 1, 2]])
        mesh, adj = prepared(TriangleMesh(v, f))
        x = np.array([0.0, 1.0, 2.0, 5.0])
        out = laplacian_smooth(VertexField(x, stage="diffused"), adj,
                               SmoothConfig(blend=1.0, iterations=4))
        assert out.values[3] == 5.0

    def test_linear(self):
        mesh, adj = prepared(icosphere(1, radius=0.5))
        rng = np.random.default_rng(3)
        cfg = SmoothConfig(blend=0.5, iterations=3)
        x = rng.normal(size=mesh.n_vertices)
        y = rng.normal(size=mesh.n_vertices)
        sx = laplacian_smooth(VertexField(x, stage="diffused"), adj, cfg).values
        sy = laplacian_smooth(VertexField(y, stage="diffused"), adj, cfg).values
        sxy = laplacian_smooth(VertexField(1.5 * x + 0.25 * y,
                                           stage="diffused"), adj, cfg).values
        np.testing.assert_allclose(sxy, 1.5 * sx + 0.25 * sy, atol=1e-12)


class TestFinalize:
    def test_gamma_square_root(self):
        field = VertexField(np.array([0.0, 0.25, 1.0]), stage="smoothed")
        out, rgb = finalize(field, SmoothConfig(gamma=0.5))
        np.testing.assert_allclose(out.values, [0.0, 0.5, 1.0], atol=1e-12)
        assert out.stage == "normalized"

    def test_constant_warns_and_zeroes(self, caplog):
        field = VertexField(np.full(5, 3.3), stage="smoothed")
        with caplog.at_level(logging.WARNING, logger="meshsal.diffusion"):
            out, rgb = finalize(field, SmoothConfig())
        np.testing.assert_array_equal(out.values, np.zeros(5))
        assert any("constant" in r.message for r in caplog.records)

    def test_endpoints_hit_colormap_extremes(self):
        field = VertexField(np.array([0.0, 0.5, 1.0]), stage="smoothed")
        _, rgb = finalize(field, SmoothConfig(gamma=1.0, colormap="viridis"))
        table = get_colormap("viridis")
        np.testing.assert_array_equal(
            rgb[0], np.round(table[0] * 255).astype(np.uint8))
        np.testing.assert_array_equal(
            rgb[2], np.round(table[255] * 255).astype(np.uint8))

    def test_min_max_normalization(self):
        field = VertexField(np.array([2.0, 4.0, 6.0]), stage="smoothed")
        out, _ = finalize(field, SmoothConfig(gamma=1.0))
        np.testing.assert_allclose(out.values, [0.0, 0.5, 1.0], atol=1e-12)

    def test_argmax_scale_invariant(self):
        rng = np.random.default_rng(8)
        x = rng.random(50)
        a, _ = finalize(VertexField(x, stage="smoothed"), SmoothConfig())
        b, _ = finalize(VertexField(37.5 * x, stage="smoothed"),
                        SmoothConfig())
        assert np.argmax(a.values) == np.argmax(b.values)


class TestRunPipeline:
    def test_empty_hits(self, sphere_setup):
        mesh, adj, accel = sphere_setup
        result = run_pipeline(mesh, adj, HitLog(), DiffusionConfig(),
                              SmoothConfig())
        np.testing.assert_array_equal(result.normalized.values,
                                      np.zeros(mesh.n_vertices))

    def test_single_hit_peak(self, sphere_setup):
        mesh, adj, accel = sphere_setup
        face = 100
        log = HitLog(subject=[0], frame=[0], ray_kind=[0], face=[face],
                     point=mesh.face_centroids[[face]], incidence=[1.0])
        result = run_pipeline(mesh, adj, log, DiffusionConfig(sigma=0.01),
                              SmoothConfig())
        peak_vertex = int(np.argmax(result.normalized.values))
        assert peak_vertex in set(mesh.faces[face])

    def test_bit_identical_rerun(self, sphere_setup):
        mesh, adj, accel = sphere_setup
        rng = np.random.default_rng(1)
        faces = rng.integers(0, mesh.n_faces, size=200)
        log = HitLog(subject=np.zeros(200), frame=np.arange(200),
                     ray_kind=np.ones(200), face=faces,
                     point=np.zeros((200, 3)), incidence=np.ones(200))
        a = run_pipeline(mesh, adj, log, DiffusionConfig(), SmoothConfig())
        b = run_pipeline(mesh, adj, log, DiffusionConfig(), SmoothConfig())
        np.testing.assert_array_equal(a.normalized.values,
                                      b.normalized.values)
        np.testing.assert_array_equal(a.rgb, b.rgb)
