"""Batch experiment orchestration: one run directory per mesh.

Per mesh: normalize, synthesize (or ingest) the gaze session, cast, diffuse,
smooth, export artifacts, and evaluate. With the ablation grid enabled the
metric table covers {single_ray, vcs} x {hopcount, euclidean, geodesic};
saliency artifacts are exported for the configured default cell.

Shuffled-AUC negatives come from the other meshes of the batch when there
are any (ids reused across meshes, modulo vertex count); a single-mesh batch
falls back to uniform random vertices and flags the rows accordingly.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bvh import build_ray_accel
from .config import RunConfig
from .diffusion import run_pipeline
from .fields import VertexField
from .gaze import parse_gaze_log, synth_turntable_session, write_gaze_log
from .mesh import (build_adjacency, compute_face_normals, load_mesh,
                   normalize_unit_diag, save_ply)
from .metrics import (FixationSet, MetricReport, fixation_density,
                      internal_consistency, kl_divergence, pearson_cc,
                      shuffled_auc, uniform_negative_pool)
from .reporting import write_metrics_csv
from .sampling import cast_session, coverage

logger = logging.getLogger(__name__)

GRID_ACQUISITIONS = ("single_ray", "vcs")
GRID_PROCESSINGS = ("hopcount", "euclidean", "geodesic")


@dataclass
class MeshRun:
    """Everything produced for one mesh before sAUC resolution."""

    mesh_id: str
    out_dir: Path
    n_vertices: int
    rows: list
    saliency_maps: dict       # (acquisition, processing) -> VertexField
    positives: dict           # acquisition -> FixationSet


def write_saliency_csv(path, field: VertexField, digest: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# config {digest}\n")
        fh.write("vertex_id,value\n")
        for i, v in enumerate(field.values):
            fh.write(f"{i},{float(v)!r}\n")


def write_face_field_csv(path, field, digest: str) -> None:
    """Debug dump of a per-face intermediate field."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config {digest} stage {field.stage}\n")
        fh.write("face_id,value\n")
        for i, v in enumerate(field.values):
            fh.write(f"{i},{float(v)!r}\n")


def _mesh_cells(cfg: RunConfig):
    if cfg.ablation_grid:
        return [(a, p) for a in GRID_ACQUISITIONS for p in GRID_PROCESSINGS]
    return [(cfg.cone.mode, cfg.diffusion.metric)]


def run_mesh(mesh_path: str, cfg: RunConfig, out_root: Path) -> MeshRun:
    """Run the full pipeline for one mesh; metrics rows lack sAUC (NaN)
    until the batch-level resolution fills them in."""
    digest = cfg.digest()
    mesh_id = Path(mesh_path).stem
    out_dir = out_root / mesh_id
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = 1 if cfg.deterministic else max(1, cfg.threads)

    t0 = time.perf_counter()
    mesh = load_mesh(mesh_path)
    mesh, scale = normalize_unit_diag(mesh)
    compute_face_normals(mesh)
    adj = build_adjacency(mesh)
    accel = build_ray_accel(mesh)
    save_ply(mesh, out_dir / "normalized.ply",
             comments=(f"meshsal {__version__} config {digest}",))

    if cfg.gaze_log:
        samples = parse_gaze_log(cfg.gaze_log)
    else:
        samples = synth_turntable_session(mesh, cfg.session)
    write_gaze_log(samples, out_dir / "gaze.jsonl")

    manifest = {
        "meshsal_version": __version__,
        "config_digest": digest,
        "mesh": str(mesh_path),
        "normalization_scale": scale,
        "n_vertices": mesh.n_vertices,
        "n_faces": mesh.n_faces,
        "seed": cfg.seed,
        "deterministic": bool(cfg.deterministic),
        "cells": [list(c) for c in _mesh_cells(cfg)],
    }
    with open(out_dir / "run.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    default_cell = (cfg.cone.mode, cfg.diffusion.metric)
    hits_by_acq = {}
    rows = []
    saliency_maps = {}
    positives = {}
    gt_density = {}

    for acquisition, processing in _mesh_cells(cfg):
        cone_cfg = replace(cfg.cone, mode=acquisition)
        diff_cfg = replace(cfg.diffusion, metric=processing)
        if acquisition not in hits_by_acq:
            hits_by_acq[acquisition] = cast_session(mesh, accel, samples,
                                                    cone_cfg)
        hits = hits_by_acq[acquisition]
        result = run_pipeline(mesh, adj, hits, diff_cfg, cfg.smoothing,
                              provenance=digest, threads=threads)
        saliency_maps[(acquisition, processing)] = result.normalized

        if acquisition not in positives:
            positives[acquisition] = FixationSet.from_hits(
                hits, adj, source=mesh_id, level="vertex")
            gt_density[acquisition] = fixation_density(
                hits, adj, level=cfg.metric_level)
        density = gt_density[acquisition]
        predicted = (result.normalized.values if cfg.metric_level == "vertex"
                     else result.diffused.values)
        try:
            cc = pearson_cc(density, predicted)
        except ValueError:
            cc = math.nan
        try:
            kl = kl_divergence(density, predicted)
        except ValueError:
            kl = math.nan
        try:
            ic = internal_consistency(mesh, adj, accel, samples, cone_cfg,
                                      diff_cfg, cfg.smoothing,
                                      threads=threads)
        except ValueError as exc:
            logger.warning("%s %s/%s: IC undefined (%s)", mesh_id,
                           acquisition, processing, exc)
            ic = math.nan
        rows.append(MetricReport(
            mesh_id=mesh_id, n_faces=mesh.n_faces,
            n_vertices=mesh.n_vertices, acquisition=acquisition,
            processing=processing, sauc=math.nan, cc=cc, kl=kl, ic=ic,
            coverage=coverage(result.raw), digest=digest))

        if (acquisition, processing) == default_cell:
            write_saliency_csv(out_dir / "saliency.csv", result.normalized,
                               digest)
            save_ply(mesh, out_dir / "saliency.ply", vertex_rgb=result.rgb,
                     comments=(f"meshsal {__version__} config {digest}",))
            if cfg.export_face_fields:
                write_face_field_csv(out_dir / "face_raw.csv", result.raw,
                                     digest)
                write_face_field_csv(out_dir / "face_diffused.csv",
                                     result.diffused, digest)
        if cfg.export_hits:
            suffix = "" if not cfg.ablation_grid else f"_{acquisition}"
            hits.to_csv(out_dir / f"hits{suffix}.csv")

    logger.info("%s: %d cells in %.1fs", mesh_id, len(rows),
                time.perf_counter() - t0)
    return MeshRun(mesh_id=mesh_id, out_dir=out_dir,
                   n_vertices=mesh.n_vertices, rows=rows,
                   saliency_maps=saliency_maps, positives=positives)


def _resolve_sauc(runs: list, cfg: RunConfig) -> None:
    """Fill in sAUC for every row, batch-shuffled when possible."""
    for mi, run in enumerate(runs):
        rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, 3, mi)))
        for row in run.rows:
            pos = run.positives[row.acquisition]
            pool_ids = []
            for other in runs:
                if other.mesh_id == run.mesh_id:
                    continue
                other_pos = other.positives.get(row.acquisition)
                if other_pos is not None and len(other_pos.ids):
                    pool_ids.append(other_pos.ids % run.n_vertices)
            try:
                if pool_ids:
                    ids = np.unique(np.concatenate(pool_ids))
                    pool = FixationSet(ids=ids, weights=np.ones(len(ids)),
                                       source="batch")
                    row.sauc_negatives = "shuffled"
                else:
                    pool = uniform_negative_pool(run.n_vertices, pos, rng)
                    row.sauc_negatives = "uniform"
                row.sauc = shuffled_auc(
                    run.saliency_maps[(row.acquisition, row.processing)],
                    pos, pool, rng)
            except ValueError as exc:
                logger.warning("%s %s/%s: sAUC undefined (%s)", run.mesh_id,
                               row.acquisition, row.processing, exc)
                row.sauc = math.nan


def run_batch(cfg: RunConfig) -> int:
    """Run every mesh in the config; returns a process exit code.

    Per-mesh failures are logged and the batch continues; any failure makes
    the exit code nonzero.
    """
    cfg.validate_paths()
    out_root = Path(cfg.output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    runs = []
    failed = 0
    for mesh_path in cfg.meshes:
        try:
            runs.append(run_mesh(mesh_path, cfg, out_root))
        except Exception as exc:
            logger.error("mesh %s failed: %s", mesh_path, exc)
            failed += 1
    _resolve_sauc(runs, cfg)
    for run in runs:
        write_metrics_csv(run.out_dir / "metrics.csv", run.rows)
    return 1 if failed else 0
