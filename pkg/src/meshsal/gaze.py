"""Gaze-log ingest/emit and the synthetic turntable session generator.

A gaze log is JSON Lines, one record per eye-tracker frame:

    {"t": <seconds>, "subject": <int>, "origin": [x, y, z],
     "m_c": [9 floats, row-major gaze-to-world rotation]}

The gaze direction is always derived as ``m_c @ [0, 0, 1]`` and never
stored. The synthetic generator replaces a headset: instead of spinning the
model it orbits the viewpoint around the bounding-box center (equivalent up
to a global per-frame rotation, and it keeps all hits in one fixed mesh
frame).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .mesh import TriangleMesh, compute_face_normals

# Fixed gaze-local boresight axis: the cone opens around local +z.
LOCAL_BORESIGHT = np.array([0.0, 0.0, 1.0])

ROTATION_TOL = 1e-4


class GazeLogError(ValueError):
    """Raised for malformed gaze-log files."""


@dataclass
class GazeSample:
    """One eye-tracker frame.

    ``frame`` is the 0-based position of this sample within its subject's
    time-ordered sequence; it seeds the per-sample RNG stream and defines
    odd/even parity, and is assigned by the parser or generator rather than
    stored in the log.
    """

    t: float
    subject: int
    origin: np.ndarray
    gaze_to_world: np.ndarray
    frame: int = 0
    gaze_dir: np.ndarray = field(init=False)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64)
        self.gaze_to_world = np.asarray(self.gaze_to_world, dtype=np.float64)
        self.gaze_dir = self.gaze_to_world @ LOCAL_BORESIGHT


def _check_rotation(m: np.ndarray, where: str) -> None:
    if m.shape != (3, 3):
        raise GazeLogError(f"m_c must be 3x3 {where}")
    if not np.allclose(m.T @ m, np.eye(3), atol=ROTATION_TOL):
        raise GazeLogError(f"non-orthonormal rotation {where}")
    if np.linalg.det(m) < 0:
        raise GazeLogError(f"improper rotation {where}")


@dataclass
class FixationSpan:
    """Fixation-script entry: during [t_start, t_end) look at a fixed world
    point or at a face centroid."""

    t_start: float
    t_end: float
    target: Optional[Sequence[float]] = None
    face: Optional[int] = None

    def __post_init__(self):
        if (self.target is None) == (self.face is None):
            raise ValueError("fixation span needs exactly one of target/face")
        if self.target is not None:
            self.target = np.asarray(self.target, dtype=np.float64)


@dataclass
class SessionConfig:
    """Synthetic session parameters (turntable acquisition protocol)."""

    duration_s: float = 25.0
    frame_rate_hz: float = 90.0
    turntable_deg_s: float = 15.0
    subjects: int = 22
    fixation_script: Sequence[FixationSpan] = ()
    gaze_noise_deg: float = 0.0
    seed: int = 0
    orbit_radius: float = 2.0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if self.frame_rate_hz <= 0:
            raise ValueError("frame rate must be positive")
        if self.gaze_noise_deg < 0:
            raise ValueError("gaze noise must be >= 0")
        if self.subjects < 1:
            raise ValueError("need at least one subject")


def parse_gaze_log(path) -> list[GazeSample]:
    """Read a JSONL gaze log, validate rotations, sort by (subject, t).

    Frame indices are assigned per subject in time order after sorting.
    """
    samples = []
    with open(path, "r") as fh:
        for recno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise GazeLogError(f"bad JSON at record {recno}: {exc}") from None
            try:
                t = float(rec["t"])
                subject = int(rec["subject"])
                origin = np.asarray(rec["origin"], dtype=np.float64)
                m_c = np.asarray(rec["m_c"], dtype=np.float64).reshape(3, 3)
            except (KeyError, TypeError, ValueError) as exc:
                raise GazeLogError(
                    f"schema violation at record {recno}: {exc}") from None
            if origin.shape != (3,):
                raise GazeLogError(f"origin must be length 3 at record {recno}")
            _check_rotation(m_c, f"at record {recno}")
            samples.append(GazeSample(t=t, subject=subject, origin=origin,
                                      gaze_to_world=m_c))
    samples.sort(key=lambda s: (s.subject, s.t))
    counter: dict[int, int] = {}
    for s in samples:
        s.frame = counter.get(s.subject, 0)
        counter[s.subject] = s.frame + 1
    return samples


def write_gaze_log(samples: Sequence[GazeSample], path) -> None:
    """Write samples as JSONL. Round-trips bit-exactly for finite values."""
    with open(path, "w") as fh:
        for s in samples:
            rec = {
                "t": float(s.t),
                "subject": int(s.subject),
                "origin": [float(x) for x in s.origin],
                "m_c": [float(x) for x in s.gaze_to_world.ravel()],
            }
            fh.write(json.dumps(rec) + "\n")


def make_gaze_frame(direction: np.ndarray) -> np.ndarray:
    """Right-handed orthonormal rotation whose third column is ``direction``.

    ``M @ [0,0,1] == direction``; world +z serves as the up hint, +y near
    the poles.
    """
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    up = np.array([0.0, 0.0, 1.0])
    if abs(d @ up) > 0.999:
        up = np.array([0.0, 1.0, 0.0])
    x = np.cross(up, d)
    x /= np.linalg.norm(x)
    y = np.cross(d, x)
    return np.column_stack([x, y, d])


def _rotate_about(v: np.ndarray, axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation of v about a unit axis."""
    c = math.cos(angle)
    s = math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1.0 - c)


def _resolve_target(span_target, mesh: TriangleMesh):
    if span_target.face is not None:
        if not 0 <= span_target.face < mesh.n_faces:
            raise ValueError(
                f"fixation target face {span_target.face} out of range")
        if mesh.face_centroids is None:
            compute_face_normals(mesh)
        return mesh.face_centroids[span_target.face]
    return span_target.target


def synth_turntable_session(mesh: TriangleMesh,
                            cfg: SessionConfig) -> list[GazeSample]:
    """Generate a scripted orbit session standing in for headset capture.

    The viewpoint circles the AABB center in the horizontal plane at
    ``orbit_radius`` (diagonal units; the mesh must be diag-normalized),
    advancing at the turntable rate, with a random per-subject start phase.
    Gaze aims at the active fixation target (default: the AABB center) with
    optional Gaussian angular jitter. Deterministic for a fixed seed.
    """
    if abs(mesh.diag - 1.0) > 1e-6:
        raise ValueError("mesh must be diag-normalized before session synthesis")
    center = mesh.aabb_center
    n_frames = int(round(cfg.duration_s * cfg.frame_rate_hz))
    omega = math.radians(cfg.turntable_deg_s)
    noise_rad = math.radians(cfg.gaze_noise_deg)
    spans = [(sp.t_start, sp.t_end, _resolve_target(sp, mesh))
             for sp in cfg.fixation_script]

    samples = []
    for subject in range(cfg.subjects):
        rng = np.random.default_rng(
            np.random.SeedSequence((cfg.seed, 1, subject)))
        phase = rng.uniform(0.0, 2.0 * math.pi)
        if noise_rad > 0:
            jit_angles = rng.normal(0.0, noise_rad, size=n_frames)
            jit_rolls = rng.uniform(0.0, 2.0 * math.pi, size=n_frames)
        for i in range(n_frames):
            t = i / cfg.frame_rate_hz
            theta = phase + omega * t
            origin = center + cfg.orbit_radius * np.array(
                [math.cos(theta), math.sin(theta), 0.0])
            target = center
            for t0, t1, tgt in spans:
                if t0 <= t < t1:
                    target = tgt
                    break
            aim = target - origin
            aim = aim / np.linalg.norm(aim)
            if noise_rad > 0:
                frame_rot = make_gaze_frame(aim)
                axis = (frame_rot[:, 0] * math.cos(jit_rolls[i])
                        + frame_rot[:, 1] * math.sin(jit_rolls[i]))
                aim = _rotate_about(aim, axis, jit_angles[i])
            samples.append(GazeSample(
                t=t, subject=subject, origin=origin,
                gaze_to_world=make_gaze_frame(aim), frame=i))
    return samples


def split_parity(samples: Sequence[GazeSample]):
    """Split per-subject frame sequences into odd and even halves.

    Positions are 1-based within each subject: frames 1, 3, 5, ... land in
    the odd half. The two halves partition the input.
    """
    odd = [s for s in samples if s.frame % 2 == 0]
    even = [s for s in samples if s.frame % 2 == 1]
    return odd, even
