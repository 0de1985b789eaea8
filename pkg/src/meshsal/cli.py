"""Command-line interface.

    meshsal pipeline <config.yaml> [--seed N] [--deterministic]
                                   [--ablation-grid] [--output-dir DIR]
    meshsal report <metrics.csv ...|glob> [-o DIR]
    meshsal normalize <mesh> -o <out.ply>
    meshsal synth-gaze <mesh> -o <gaze.jsonl> [session options]
    meshsal sample <mesh> <gaze.jsonl> -o <hits.csv> [cone options]
    meshsal diffuse <mesh> <hits.csv> -o <saliency.csv> [--ply out.ply] ...
    meshsal metrics <mesh> <hits.csv> <saliency.csv> -o <metrics.csv>

Stage subcommands normalize their input mesh on load (idempotent), so they
compose: normalize -> synth-gaze -> sample -> diffuse -> metrics.
"""

from __future__ import annotations

import argparse
import glob
import logging
import math
import sys

import numpy as np

from . import __version__
from ._kernels import active_backend
from .bvh import build_ray_accel
from .config import ConfigError, load_run_config
from .diffusion import DiffusionConfig, SmoothConfig, run_pipeline
from .fields import short_digest
from .gaze import SessionConfig, parse_gaze_log, synth_turntable_session, \
    write_gaze_log
from .mesh import (build_adjacency, compute_face_normals, load_mesh,
                   normalize_unit_diag, save_ply)
from .metrics import (FixationSet, MetricReport, fixation_density,
                      kl_divergence, pearson_cc, shuffled_auc,
                      uniform_negative_pool)
from .reporting import (aggregate_ablation, aggregate_coverage,
                        read_metrics_csv, write_metrics_csv, write_table_csv)
from .runner import run_batch, write_face_field_csv, write_saliency_csv
from .sampling import ConeConfig, HitLog, cast_session, coverage, \
    accumulate_raw


def _load_normalized(path):
    mesh = load_mesh(path)
    mesh, _ = normalize_unit_diag(mesh)
    compute_face_normals(mesh)
    return mesh


def _cmd_pipeline(args) -> int:
    try:
        cfg = load_run_config(args.config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.session.seed = args.seed
        cfg.cone.seed = args.seed
    if args.deterministic:
        cfg.deterministic = True
    if args.ablation_grid:
        cfg.ablation_grid = True
    if args.output_dir:
        cfg.output_dir = args.output_dir
    try:
        cfg.validate_paths()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run_batch(cfg)


def _cmd_report(args) -> int:
    paths = []
    for pattern in args.inputs:
        hit = sorted(glob.glob(pattern, recursive=True))
        paths.extend(hit if hit else [pattern])
    try:
        reports = read_metrics_csv(paths)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ablation = aggregate_ablation(reports)
    cov = aggregate_coverage(reports)
    if args.output:
        from pathlib import Path
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        write_table_csv(out / "ablation.csv", ablation)
        write_table_csv(out / "coverage.csv", cov)
    else:
        print("# ablation (mean per acquisition x processing)")
        for row in ablation:
            print(",".join(str(row[k]) for k in row))
        print("# coverage by face-count bucket")
        for row in cov:
            print(",".join(str(row[k]) for k in row))
    return 0


def _cmd_normalize(args) -> int:
    mesh = _load_normalized(args.mesh)
    save_ply(mesh, args.output,
             comments=(f"meshsal {__version__} normalized",))
    print(f"wrote {args.output} ({mesh.n_vertices} vertices, "
          f"{mesh.n_faces} faces, diag={mesh.diag:.9f})", file=sys.stderr)
    return 0


def _session_from_args(args) -> SessionConfig:
    return SessionConfig(duration_s=args.duration, frame_rate_hz=args.rate,
                         turntable_deg_s=args.turntable,
                         subjects=args.subjects,
                         gaze_noise_deg=args.noise, seed=args.seed)


def _cmd_synth_gaze(args) -> int:
    mesh = _load_normalized(args.mesh)
    samples = synth_turntable_session(mesh, _session_from_args(args))
    write_gaze_log(samples, args.output)
    print(f"wrote {args.output} ({len(samples)} samples)", file=sys.stderr)
    return 0


def _cone_from_args(args) -> ConeConfig:
    return ConeConfig(aperture_deg=args.aperture,
                      spread_sigma_deg=args.spread_sigma,
                      rays_per_sample=args.rays, mode=args.mode,
                      backface_threshold=args.backface_threshold,
                      seed=args.seed)


def _cmd_sample(args) -> int:
    mesh = _load_normalized(args.mesh)
    accel = build_ray_accel(mesh)
    samples = parse_gaze_log(args.gaze)
    hits = cast_session(mesh, accel, samples, _cone_from_args(args))
    hits.to_csv(args.output)
    cov = coverage(accumulate_raw(hits, mesh.n_faces))
    print(f"wrote {args.output} ({len(hits)} hits, coverage={cov:.4f})",
          file=sys.stderr)
    return 0


def _cmd_diffuse(args) -> int:
    mesh = _load_normalized(args.mesh)
    adj = build_adjacency(mesh)
    hits = HitLog.from_csv(args.hits)
    diff_cfg = DiffusionConfig(sigma=args.sigma, d_max=args.d_max,
                               metric=args.metric, hop_sigma=args.hop_sigma)
    smooth_cfg = SmoothConfig(blend=args.blend, iterations=args.iterations,
                              gamma=args.gamma, colormap=args.colormap)
    digest = short_digest({"diffusion": vars(diff_cfg),
                           "smoothing": vars(smooth_cfg)})
    result = run_pipeline(mesh, adj, hits, diff_cfg, smooth_cfg,
                          provenance=digest, threads=args.threads)
    write_saliency_csv(args.output, result.normalized, digest)
    if args.ply:
        save_ply(mesh, args.ply, vertex_rgb=result.rgb,
                 comments=(f"meshsal {__version__} config {digest}",))
    if args.dump_face_fields:
        base = str(args.output).rsplit(".", 1)[0]
        write_face_field_csv(base + "_face_raw.csv", result.raw, digest)
        write_face_field_csv(base + "_face_diffused.csv", result.diffused,
                             digest)
    print(f"wrote {args.output}", file=sys.stderr)
    return 0


def _cmd_metrics(args) -> int:
    mesh = _load_normalized(args.mesh)
    adj = build_adjacency(mesh)
    hits = HitLog.from_csv(args.hits)
    values = np.full(mesh.n_vertices, math.nan)
    with open(args.saliency) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("vertex_id"):
                continue
            vid, val = line.strip().split(",")
            values[int(vid)] = float(val)
    if np.isnan(values).any():
        print("error: saliency CSV does not cover every vertex",
              file=sys.stderr)
        return 2
    from .fields import VertexField
    saliency = VertexField(values=values, stage="normalized")
    density = fixation_density(hits, adj)
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 3, 0)))
    positives = FixationSet.from_hits(hits, adj)
    pool = uniform_negative_pool(mesh.n_vertices, positives, rng)
    row = MetricReport(
        mesh_id=args.mesh, n_faces=mesh.n_faces, n_vertices=mesh.n_vertices,
        acquisition="recorded", processing="external",
        sauc=shuffled_auc(saliency, positives, pool, rng),
        cc=pearson_cc(density, values), kl=kl_divergence(density, values),
        ic=math.nan, coverage=coverage(accumulate_raw(hits, mesh.n_faces)),
        sauc_negatives="uniform")
    write_metrics_csv(args.output, [row])
    print(f"wrote {args.output}", file=sys.stderr)
    return 0


def _add_seed(p):
    p.add_argument("--seed", type=int, default=0, help="RNG seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshsal",
        description="Gaze-driven 3D mesh saliency ground-truth pipeline")
    parser.add_argument("--version", action="version",
                        version=f"meshsal {__version__} "
                                f"({active_backend()} kernels)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pipeline", help="run the full batch from a config")
    p.add_argument("config", help="YAML run configuration")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--deterministic", action="store_true",
                   help="force single-threaded, byte-stable outputs")
    p.add_argument("--ablation-grid", action="store_true",
                   help="run {single_ray,vcs} x {hopcount,euclidean,geodesic}")
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=_cmd_pipeline)

    p = sub.add_parser("report", help="aggregate metric CSVs into tables")
    p.add_argument("inputs", nargs="+", help="metric CSV paths or globs")
    p.add_argument("-o", "--output", default=None,
                   help="directory for ablation.csv / coverage.csv")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("normalize", help="rescale a mesh to unit diagonal")
    p.add_argument("mesh")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("synth-gaze", help="generate a turntable gaze log")
    p.add_argument("mesh")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--duration", type=float, default=25.0)
    p.add_argument("--rate", type=float, default=90.0)
    p.add_argument("--turntable", type=float, default=15.0)
    p.add_argument("--subjects", type=int, default=22)
    p.add_argument("--noise", type=float, default=0.0,
                   help="gaze jitter std, degrees")
    _add_seed(p)
    p.set_defaults(func=_cmd_synth_gaze)

    p = sub.add_parser("sample", help="cast a gaze log against a mesh")
    p.add_argument("mesh")
    p.add_argument("gaze")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mode", choices=["vcs", "single_ray"], default="vcs")
    p.add_argument("--aperture", type=float, default=5.0)
    p.add_argument("--spread-sigma", type=float, default=None)
    p.add_argument("--rays", type=int, default=64)
    p.add_argument("--backface-threshold", type=float, default=0.1)
    _add_seed(p)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("diffuse", help="hit log -> saliency CSV / colored PLY")
    p.add_argument("mesh")
    p.add_argument("hits")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--ply", default=None, help="also write colored PLY")
    p.add_argument("--metric", choices=["geodesic", "euclidean", "hopcount"],
                   default="geodesic")
    p.add_argument("--sigma", type=float, default=0.02)
    p.add_argument("--d-max", type=float, default=None)
    p.add_argument("--hop-sigma", type=float, default=3.0)
    p.add_argument("--blend", type=float, default=0.5)
    p.add_argument("--iterations", type=int, default=3)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--colormap", default="viridis")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dump-face-fields", action="store_true",
                   help="debug: also write per-face raw/diffused CSVs")
    p.set_defaults(func=_cmd_diffuse)

    p = sub.add_parser("metrics", help="evaluate a saliency CSV against hits")
    p.add_argument("mesh")
    p.add_argument("hits")
    p.add_argument("saliency")
    p.add_argument("-o", "--output", required=True)
    _add_seed(p)
    p.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
