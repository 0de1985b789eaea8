"""Saliency evaluation metrics against fixation densities.

Correlation and divergence compare a predicted vertex saliency map with the
ground-truth fixation density (raw hit counts averaged onto vertices, no
diffusion, so both live on the same domain). The shuffled ROC area scores
how well saliency separates fixated vertices from negatives drawn from
other stimuli's fixations (uniform random vertices as the flagged
single-mesh fallback). Internal consistency rebuilds the saliency map
independently from the odd-frame and even-frame halves of a session and
correlates the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .diffusion import (DiffusionConfig, SmoothConfig, face_to_vertex,
                        run_pipeline)
from .fields import FaceField, VertexField
from .gaze import GazeSample, split_parity
from .mesh import AdjacencyIndex, TriangleMesh
from .sampling import ConeConfig, HitLog, accumulate_raw, cast_session

SCHEMA_VERSION = "meshsal-metrics-v1"


@dataclass
class FixationSet:
    """Fixated vertex (or face) ids with positive hit-derived weights."""

    ids: np.ndarray
    weights: np.ndarray
    source: str = ""
    level: str = "vertex"

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.ids) != len(self.weights):
            raise ValueError("ids and weights length mismatch")
        if self.weights.size and self.weights.min() <= 0:
            raise ValueError("fixation weights must be positive")

    @classmethod
    def from_hits(cls, hits: HitLog, adj: AdjacencyIndex,
                  source: str = "", level: str = "vertex") -> "FixationSet":
        raw = accumulate_raw(hits, adj.n_faces)
        if level == "face":
            ids = np.nonzero(raw.values)[0]
            return cls(ids=ids, weights=raw.values[ids], source=source,
                       level="face")
        density = face_to_vertex(
            FaceField(raw.values, stage="diffused"), adj)
        ids = np.nonzero(density.values)[0]
        return cls(ids=ids, weights=density.values[ids], source=source,
                   level="vertex")


def fixation_density(hits: HitLog, adj: AdjacencyIndex,
                     level: str = "vertex") -> np.ndarray:
    """Ground-truth density: raw hit counts, averaged onto vertices (or
    kept on faces with ``level='face'``)."""
    raw = accumulate_raw(hits, adj.n_faces)
    if level == "face":
        return raw.values
    return face_to_vertex(FaceField(raw.values, stage="diffused"), adj).values


# ---------------------------------------------------------------------------
# Scalar metrics
# ---------------------------------------------------------------------------

def pearson_cc(a, b) -> float:
    """Pearson correlation; errors out when either input has no variance."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size < 2:
        raise ValueError("inputs must be equal-length with at least 2 entries")
    da = a - a.mean()
    db = b - b.mean()
    va = float(da @ da)
    vb = float(db @ db)
    if va == 0.0 or vb == 0.0:
        raise ValueError("undefined CC: zero-variance input")
    return float(da @ db) / math.sqrt(va * vb)


def kl_divergence(p, q, eps: float = 1e-12) -> float:
    """KL(p || q) after epsilon-shifting and renormalizing both to sum 1.

    Direction: p is the fixation density, q the saliency map.
    """
    p = np.asarray(p, dtype=np.float64).ravel()
    q = np.asarray(q, dtype=np.float64).ravel()
    if p.shape != q.shape:
        raise ValueError("inputs must be equal length")
    if p.min() < 0 or q.min() < 0:
        raise ValueError("densities must be non-negative")
    ps = p.sum()
    qs = q.sum()
    if ps <= 0 or qs <= 0:
        raise ValueError("all-zero density")
    p = (p + eps)
    q = (q + eps)
    p = p / p.sum()
    q = q / q.sum()
    return float(np.sum(p * np.log(p / q)))


def _rank_auc(pos_vals: np.ndarray, neg_vals: np.ndarray) -> float:
    """ROC area via the Mann-Whitney statistic with midranks for ties."""
    from scipy.stats import rankdata

    n_pos = len(pos_vals)
    n_neg = len(neg_vals)
    ranks = rankdata(np.concatenate([pos_vals, neg_vals]))
    r_pos = ranks[:n_pos].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def shuffled_auc(saliency: VertexField, positives: FixationSet,
                 negative_pool: FixationSet, rng,
                 rounds: int = 10) -> float:
    """Shuffled ROC area.

    Saliency values at the fixated ids are ranked against values at ids
    sampled with replacement (count-matched) from the negative pool;
    positives overlapping the pool are removed from the pool first. Ties
    contribute 0.5; the result averages ``rounds`` resamplings.
    """
    if len(positives.ids) == 0:
        raise ValueError("empty positive fixation set")
    values = saliency.values
    pool = np.setdiff1d(negative_pool.ids, positives.ids)
    if pool.size == 0:
        raise ValueError("negative pool is empty after overlap removal")
    pos_vals = values[positives.ids]
    total = 0.0
    for _ in range(rounds):
        neg_ids = rng.choice(pool, size=len(positives.ids), replace=True)
        total += _rank_auc(pos_vals, values[neg_ids])
    return total / rounds


def uniform_negative_pool(n_vertices: int, positives: FixationSet,
                          rng, size: Optional[int] = None) -> FixationSet:
    """Single-mesh fallback negative pool: uniform random vertex ids."""
    size = size if size is not None else max(len(positives.ids) * 10, 100)
    ids = rng.integers(0, n_vertices, size=size)
    ids = np.unique(ids)
    return FixationSet(ids=ids, weights=np.ones(len(ids)),
                       source="uniform-fallback")


def internal_consistency(mesh: TriangleMesh, adj: AdjacencyIndex, accel,
                         samples: Sequence[GazeSample],
                         cone_cfg: ConeConfig,
                         diffusion_cfg: DiffusionConfig,
                         smooth_cfg: SmoothConfig,
                         threads: int = 1) -> float:
    """Correlation between saliency maps built from odd and even frames.

    Both halves run the full generation pipeline with identical configs;
    per-sample RNG streams key on the original frame index, so a sample's
    rays are the same whichever half it lands in.
    """
    odd, even = split_parity(samples)
    if not odd or not even:
        raise ValueError("internal consistency needs at least 2 frames")
    maps = []
    for half in (odd, even):
        hits = cast_session(mesh, accel, half, cone_cfg)
        result = run_pipeline(mesh, adj, hits, diffusion_cfg, smooth_cfg,
                              threads=threads)
        maps.append(result.normalized.values)
    try:
        return pearson_cc(maps[0], maps[1])
    except ValueError as exc:
        raise ValueError(f"degenerate parity half: {exc}") from None


def improvement_factor(coverage_vcs: float, coverage_single: float) -> float:
    """Coverage ratio of cone sampling over the single-ray baseline.

    A zero single-ray coverage yields inf, which aggregation excludes.
    """
    if coverage_single < 0 or coverage_vcs < 0:
        raise ValueError("coverage must be non-negative")
    if coverage_single == 0.0:
        return math.inf
    return coverage_vcs / coverage_single


@dataclass
class MetricReport:
    """One evaluation row: a (mesh, acquisition, processing) cell."""

    mesh_id: str
    n_faces: int
    n_vertices: int
    acquisition: str
    processing: str
    sauc: float
    cc: float
    kl: float
    ic: float
    coverage: float
    sauc_negatives: str = "uniform"
    digest: str = ""
    schema: str = field(default=SCHEMA_VERSION)
