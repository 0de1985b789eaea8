"""View-cone gaze sampling: ray bundles, casting, and hit accumulation.

Each gaze frame expands into a cone of rays around the primary axis. Spread
angles come from the sine-arm Box-Muller transform (absolute value, redrawn
until they land strictly inside the half-aperture), roll angles are uniform,
so ray density falls off as a Gaussian toward the cone rim. A single-ray
baseline mode casts only the central axis. In cone mode the central ray is
still cast and recorded (``ray_kind='central'``), so a single-ray dataset is
always an exact subset of the cone run with the same seed.

Hits behind a grazing or back-facing surface are culled by the incidence
filter: keep iff ``n_f . (-D) > threshold``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .bvh import RayAccel, cast_rays
from .fields import FaceField
from .gaze import LOCAL_BORESIGHT, GazeSample
from .mesh import TriangleMesh

MODES = ("vcs", "single_ray")
RAY_KIND_CENTRAL = 0
RAY_KIND_BUNDLE = 1
_KIND_NAMES = {RAY_KIND_CENTRAL: "central", RAY_KIND_BUNDLE: "bundle"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}


@dataclass
class ConeConfig:
    """Cone sampling parameters.

    ``spread_sigma_deg`` defaults to aperture/6 so that 99.7% of raw draws
    land inside the half-aperture (three-sigma rule).
    """

    aperture_deg: float = 5.0
    spread_sigma_deg: Optional[float] = None
    rays_per_sample: int = 64
    mode: str = "vcs"
    backface_threshold: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.spread_sigma_deg is None:
            self.spread_sigma_deg = self.aperture_deg / 6.0
        if not 0 < self.aperture_deg < 180:
            raise ValueError("aperture must be in (0, 180) degrees")
        if self.spread_sigma_deg <= 0:
            raise ValueError("spread sigma must be positive")
        if self.rays_per_sample < 1:
            raise ValueError("need at least one ray per sample")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")


@dataclass
class HitRecord:
    """One accepted ray-surface collision."""

    face: int
    point: np.ndarray
    incidence: float
    sample_id: tuple
    ray_kind: str


class HitLog:
    """Columnar store for accepted hits across a whole session."""

    __slots__ = ("subject", "frame", "ray_kind", "face", "point", "incidence")

    def __init__(self, subject=None, frame=None, ray_kind=None, face=None,
                 point=None, incidence=None):
        self.subject = np.asarray(
            subject if subject is not None else [], dtype=np.int32)
        self.frame = np.asarray(
            frame if frame is not None else [], dtype=np.int32)
        self.ray_kind = np.asarray(
            ray_kind if ray_kind is not None else [], dtype=np.int8)
        self.face = np.asarray(
            face if face is not None else [], dtype=np.int64)
        self.point = np.asarray(
            point if point is not None else np.empty((0, 3)), dtype=np.float64)
        self.incidence = np.asarray(
            incidence if incidence is not None else [], dtype=np.float64)

    def __len__(self) -> int:
        return len(self.face)

    @classmethod
    def concat(cls, logs: Sequence["HitLog"]) -> "HitLog":
        return cls(
            subject=np.concatenate([l.subject for l in logs]) if logs else None,
            frame=np.concatenate([l.frame for l in logs]) if logs else None,
            ray_kind=np.concatenate([l.ray_kind for l in logs]) if logs else None,
            face=np.concatenate([l.face for l in logs]) if logs else None,
            point=np.concatenate([l.point for l in logs]) if logs else None,
            incidence=np.concatenate([l.incidence for l in logs]) if logs else None,
        )

    def subset(self, mask: np.ndarray) -> "HitLog":
        return HitLog(subject=self.subject[mask], frame=self.frame[mask],
                      ray_kind=self.ray_kind[mask], face=self.face[mask],
                      point=self.point[mask], incidence=self.incidence[mask])

    def central_only(self) -> "HitLog":
        return self.subset(self.ray_kind == RAY_KIND_CENTRAL)

    def records(self) -> list[HitRecord]:
        return [HitRecord(face=int(self.face[i]), point=self.point[i],
                          incidence=float(self.incidence[i]),
                          sample_id=(int(self.subject[i]), int(self.frame[i])),
                          ray_kind=_KIND_NAMES[int(self.ray_kind[i])])
                for i in range(len(self))]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["subject", "frame", "ray_kind", "face",
                        "px", "py", "pz", "incidence"])
            for i in range(len(self)):
                w.writerow([
                    int(self.subject[i]), int(self.frame[i]),
                    _KIND_NAMES[int(self.ray_kind[i])], int(self.face[i]),
                    repr(float(self.point[i, 0])),
                    repr(float(self.point[i, 1])),
                    repr(float(self.point[i, 2])),
                    repr(float(self.incidence[i])),
                ])

    @classmethod
    def from_csv(cls, path) -> "HitLog":
        subject, frame, kind, face, pts, inc = [], [], [], [], [], []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                subject.append(int(row["subject"]))
                frame.append(int(row["frame"]))
                kind.append(_KIND_CODES[row["ray_kind"]])
                face.append(int(row["face"]))
                pts.append([float(row["px"]), float(row["py"]),
                            float(row["pz"])])
                inc.append(float(row["incidence"]))
        return cls(subject=subject, frame=frame, ray_kind=kind, face=face,
                   point=np.asarray(pts).reshape(-1, 3), incidence=inc)


# ---------------------------------------------------------------------------
# Spread-angle sampling
# ---------------------------------------------------------------------------

def sample_spread_angle(rng, spread_sigma_deg: float, aperture_deg: float,
                        max_redraws: int = 1000) -> float:
    """Draw one cone spread angle in degrees.

    Sine-arm Box-Muller: ``sigma * sqrt(-2 ln u1) * sin(2 pi u2)`` with
    u1, u2 ~ U(0,1); the absolute value is redrawn until it lies strictly
    inside (0, aperture/2). Rejection (rather than clamping) keeps the
    Gaussian falloff intact inside the cone instead of piling mass on the
    rim.
    """
    half = aperture_deg / 2.0
    for _ in range(max_redraws):
        u1 = rng.random()
        u2 = rng.random()
        if u1 <= 0.0:
            continue
        r = abs(spread_sigma_deg * math.sqrt(-2.0 * math.log(u1))
                * math.sin(2.0 * math.pi * u2))
        if 0.0 < r < half:
            return r
    raise ValueError(
        f"pathological spread sigma: no draw inside the half-aperture "
        f"after {max_redraws} attempts")


def sample_spread_angles(rng, spread_sigma_deg: float, aperture_deg: float,
                         n: int, max_rounds: int = 1000) -> np.ndarray:
    """Vectorized counterpart of :func:`sample_spread_angle`."""
    half = aperture_deg / 2.0
    out = np.empty(n)
    pending = np.arange(n)
    for _ in range(max_rounds):
        u1 = rng.random(pending.size)
        u2 = rng.random(pending.size)
        with np.errstate(divide="ignore"):
            r = np.abs(spread_sigma_deg * np.sqrt(-2.0 * np.log(u1))
                       * np.sin(2.0 * np.pi * u2))
        ok = (r > 0.0) & (r < half)
        out[pending[ok]] = r[ok]
        pending = pending[~ok]
        if pending.size == 0:
            return out
    raise ValueError(
        f"pathological spread sigma: rejection did not converge in "
        f"{max_rounds} rounds")


def cone_ray_direction(roll_rad: float, spread_deg: float,
                       gaze_to_world: np.ndarray) -> np.ndarray:
    """World-space bundle ray: boresight tilted by the spread angle about
    the local x-axis, then rolled about the local z-axis, then rotated into
    the world frame."""
    s = math.sin(math.radians(spread_deg))
    c = math.cos(math.radians(spread_deg))
    local = np.array([s * math.sin(roll_rad), -s * math.cos(roll_rad), c])
    return gaze_to_world @ local


def _bundle_local_dirs(spreads_deg: np.ndarray,
                       rolls_rad: np.ndarray) -> np.ndarray:
    rad = np.radians(spreads_deg)
    s = np.sin(rad)
    return np.stack([s * np.sin(rolls_rad), -s * np.cos(rolls_rad),
                     np.cos(rad)], axis=1)


def backface_accept(face_normal: np.ndarray, ray_dir: np.ndarray,
                    threshold: float) -> bool:
    """Keep a hit iff the incidence dot ``n_f . (-D)`` strictly exceeds the
    threshold; grazing and rear-facing collisions are culled."""
    return float(face_normal @ (-np.asarray(ray_dir))) > threshold


# ---------------------------------------------------------------------------
# Casting
# ---------------------------------------------------------------------------

def _sample_rng(seed: int, subject: int, frame: int):
    return np.random.default_rng(np.random.SeedSequence((seed, 2, subject,
                                                         frame)))


def _sample_dirs(sample: GazeSample, cfg: ConeConfig) -> np.ndarray:
    """Ray directions for one gaze sample; row 0 is always the central axis."""
    central = sample.gaze_to_world @ LOCAL_BORESIGHT
    if cfg.mode == "single_ray":
        return central[None, :]
    rng = _sample_rng(cfg.seed, sample.subject, sample.frame)
    spreads = sample_spread_angles(rng, cfg.spread_sigma_deg,
                                   cfg.aperture_deg, cfg.rays_per_sample)
    rolls = rng.uniform(0.0, 2.0 * math.pi, cfg.rays_per_sample)
    local = _bundle_local_dirs(spreads, rolls)
    world = local @ sample.gaze_to_world.T
    return np.concatenate([central[None, :], world])


def cast_sample(mesh: TriangleMesh, accel: RayAccel, sample: GazeSample,
                cfg: ConeConfig) -> list[HitRecord]:
    """Cast one gaze sample's rays; returns accepted hits only."""
    log = cast_session(mesh, accel, [sample], cfg)
    return log.records()


def cast_session(mesh: TriangleMesh, accel: RayAccel,
                 samples: Sequence[GazeSample], cfg: ConeConfig,
                 batch_rays: int = 200_000) -> HitLog:
    """Cast a whole session and collect accepted hits columnar.

    Deterministic: each sample draws from its own RNG stream keyed by
    (seed, subject, frame), so results do not depend on sample order or
    batch size.
    """
    if mesh.face_normals is None:
        raise ValueError("compute face normals before casting")
    normals = mesh.face_normals
    parts = []
    origins = np.empty((batch_rays, 3))
    dirs = np.empty((batch_rays, 3))
    meta = np.empty((batch_rays, 3), dtype=np.int64)  # subject, frame, kind
    fill = 0

    def flush():
        nonlocal fill
        if fill == 0:
            return
        faces, ts = cast_rays(accel, origins[:fill], dirs[:fill])
        hit = faces >= 0
        if hit.any():
            f = faces[hit]
            d = dirs[:fill][hit]
            o = origins[:fill][hit]
            inc = -np.einsum("ij,ij->i", normals[f], d)
            keep = inc > cfg.backface_threshold
            if keep.any():
                pts = o[keep] + ts[hit][keep, None] * d[keep]
                kept_meta = meta[:fill][hit][keep]
                parts.append(HitLog(
                    subject=kept_meta[:, 0], frame=kept_meta[:, 1],
                    ray_kind=kept_meta[:, 2], face=f[keep], point=pts,
                    incidence=inc[keep]))
        fill = 0

    for sample in samples:
        sd = _sample_dirs(sample, cfg)
        k = len(sd)
        if fill + k > batch_rays:
            flush()
        origins[fill:fill + k] = sample.origin
        dirs[fill:fill + k] = sd
        meta[fill:fill + k, 0] = sample.subject
        meta[fill:fill + k, 1] = sample.frame
        meta[fill:fill + k, 2] = RAY_KIND_BUNDLE
        meta[fill, 2] = RAY_KIND_CENTRAL
        fill += k
    flush()
    if not parts:
        return HitLog()
    return HitLog.concat(parts)


# ---------------------------------------------------------------------------
# Accumulation
# ---------------------------------------------------------------------------

def accumulate_raw(hits, n_faces: int, provenance: str = "") -> FaceField:
    """Per-face cumulative hit counts over all subjects, frames, and rays.

    No time weighting: permuting hit order cannot change the field, and the
    values sum to the total number of accepted hits.
    """
    if isinstance(hits, HitLog):
        faces = hits.face
    else:
        faces = np.asarray([h.face for h in hits], dtype=np.int64)
    if faces.size and (faces.min() < 0 or faces.max() >= n_faces):
        raise ValueError("hit references face outside the mesh")
    values = np.bincount(faces, minlength=n_faces).astype(np.float64)
    return FaceField(values=values, stage="raw", provenance=provenance)


def coverage(raw: FaceField) -> float:
    """Fraction of faces with at least one hit."""
    if raw.stage != "raw":
        raise ValueError("coverage is defined on the raw hit-count field")
    if len(raw) == 0:
        return 0.0
    return float(np.count_nonzero(raw.values)) / len(raw)
