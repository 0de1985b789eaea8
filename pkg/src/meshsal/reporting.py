"""Metric-report CSV emission and aggregate tables.

One CSV row per (mesh, acquisition mode, processing mode). Aggregation
produces the ablation table (mean metrics per cell) and the coverage table
grouped by face-count buckets with the cone/single-ray improvement factor
per bucket.
"""

from __future__ import annotations

import csv
import math
import os
from typing import Sequence

from .metrics import SCHEMA_VERSION, MetricReport

_COLUMNS = ["schema", "digest", "mesh_id", "n_faces", "n_vertices",
            "acquisition", "processing", "sauc", "sauc_negatives",
            "cc", "kl", "ic", "coverage"]

# Face-count bucket edges for the coverage table.
FACE_BUCKETS = [
    ("<100k", 0, 100_000),
    ("100k-200k", 100_000, 200_000),
    ("200k-300k", 200_000, 300_000),
    ("300k-600k", 300_000, 600_000),
    ("600k-900k", 600_000, 900_000),
    (">900k", 900_000, math.inf),
]


def write_metrics_csv(path, reports: Sequence[MetricReport]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_COLUMNS)
        for r in reports:
            w.writerow([r.schema, r.digest, r.mesh_id, r.n_faces,
                        r.n_vertices, r.acquisition, r.processing,
                        repr(r.sauc), r.sauc_negatives, repr(r.cc),
                        repr(r.kl), repr(r.ic), repr(r.coverage)])


def read_metrics_csv(paths) -> list[MetricReport]:
    """Load rows from one or more CSVs, refusing mixed schema versions."""
    if isinstance(paths, (str, bytes, os.PathLike)):
        paths = [paths]
    reports = []
    for path in paths:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                if row["schema"] != SCHEMA_VERSION:
                    raise ValueError(
                        f"{path}: schema {row['schema']!r} does not match "
                        f"{SCHEMA_VERSION!r}; refusing to aggregate")
                reports.append(MetricReport(
                    mesh_id=row["mesh_id"], n_faces=int(row["n_faces"]),
                    n_vertices=int(row["n_vertices"]),
                    acquisition=row["acquisition"],
                    processing=row["processing"],
                    sauc=float(row["sauc"]),
                    sauc_negatives=row["sauc_negatives"],
                    cc=float(row["cc"]), kl=float(row["kl"]),
                    ic=float(row["ic"]), coverage=float(row["coverage"]),
                    digest=row["digest"], schema=row["schema"]))
    return reports


def _mean(xs):
    xs = [x for x in xs if not math.isnan(x)]
    return sum(xs) / len(xs) if xs else math.nan


def aggregate_ablation(reports: Sequence[MetricReport]) -> list[dict]:
    """Mean metrics per (acquisition, processing) cell."""
    cells = {}
    for r in reports:
        cells.setdefault((r.acquisition, r.processing), []).append(r)
    rows = []
    for (acq, proc) in sorted(cells):
        rs = cells[(acq, proc)]
        rows.append({
            "acquisition": acq,
            "processing": proc,
            "n_meshes": len({r.mesh_id for r in rs}),
            "sauc": _mean([r.sauc for r in rs]),
            "cc": _mean([r.cc for r in rs]),
            "kl": _mean([r.kl for r in rs]),
            "ic": _mean([r.ic for r in rs]),
        })
    return rows


def aggregate_coverage(reports: Sequence[MetricReport]) -> list[dict]:
    """Coverage means per face-count bucket plus improvement factors.

    Coverage depends only on the acquisition mode, so duplicate rows from
    different processing modes collapse to one value per (mesh,
    acquisition). Buckets with no meshes are omitted; infinite improvement
    factors are excluded from the bucket ratio.
    """
    per_mesh = {}
    for r in reports:
        per_mesh.setdefault((r.mesh_id, r.acquisition),
                            (r.n_faces, r.coverage))
    rows = []
    for name, lo, hi in FACE_BUCKETS:
        vcs = []
        single = []
        for (mesh_id, acq), (n_faces, cov) in per_mesh.items():
            if not lo <= n_faces < hi:
                continue
            if acq == "vcs":
                vcs.append(cov)
            elif acq == "single_ray":
                single.append(cov)
        if not vcs and not single:
            continue
        row = {"bucket": name,
               "n_meshes": max(len(vcs), len(single)),
               "coverage_vcs": _mean(vcs) if vcs else math.nan,
               "coverage_single": _mean(single) if single else math.nan}
        if vcs and single and row["coverage_single"] > 0:
            row["improvement"] = row["coverage_vcs"] / row["coverage_single"]
        else:
            row["improvement"] = math.nan
        rows.append(row)
    return rows


def write_table_csv(path, rows: Sequence[dict]) -> None:
    if not rows:
        with open(path, "w", newline="") as fh:
            fh.write("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        for row in rows:
            w.writerow(row)
