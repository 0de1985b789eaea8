"""Run configuration: YAML parsing, validation, defaults, digests.

Every tunable carries its standard default, so a minimal config is just
mesh paths:

    meshes: [models/bunny.obj]
    output_dir: out

Full shape (all values optional):

    meshes: [a.obj, b.ply]
    output_dir: out
    seed: 0
    deterministic: true
    threads: 1
    ablation_grid: false
    export_hits: false
    export_face_fields: false       # debug dump of per-face intermediates
    gaze_log: recorded.jsonl        # skip synthesis, ingest this log
    metric_level: vertex            # or face
    session:
      duration_s: 25.0
      frame_rate_hz: 90.0
      turntable_deg_s: 15.0
      subjects: 22
      gaze_noise_deg: 0.0
      orbit_radius: 2.0
      fixation:
        - {start: 0.0, end: 10.0, target: [0, 0, 0]}
        - {start: 10.0, end: 25.0, face: 17}
    cone:
      aperture_deg: 5.0
      spread_sigma_deg: null        # defaults to aperture / 6
      rays_per_sample: 64
      mode: vcs                     # or single_ray
      backface_threshold: 0.1
    diffusion:
      sigma: 0.02
      d_max: null                   # defaults to 3 * sigma
      metric: geodesic              # or euclidean, hopcount
      hop_sigma: 3.0
    smoothing:
      blend: 0.5
      iterations: 3
      gamma: 0.5
      colormap: viridis
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import yaml

from .diffusion import DiffusionConfig, SmoothConfig
from .fields import short_digest
from .gaze import FixationSpan, SessionConfig
from .sampling import ConeConfig


class ConfigError(ValueError):
    """Raised for unparseable or invalid run configurations."""


@dataclass
class RunConfig:
    """Everything one batch run needs, with the seed recorded everywhere."""

    meshes: list
    output_dir: str = "out"
    seed: int = 0
    deterministic: bool = False
    threads: int = 1
    ablation_grid: bool = False
    export_hits: bool = False
    export_face_fields: bool = False
    gaze_log: Optional[str] = None
    metric_level: str = "vertex"
    session: SessionConfig = field(default_factory=SessionConfig)
    cone: ConeConfig = field(default_factory=ConeConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    smoothing: SmoothConfig = field(default_factory=SmoothConfig)

    def __post_init__(self):
        if not self.meshes:
            raise ConfigError("config lists no meshes")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.metric_level not in ("vertex", "face"):
            raise ConfigError("metric_level must be 'vertex' or 'face'")
        # The global seed flows into the per-stage configs.
        self.session.seed = self.seed
        self.cone.seed = self.seed

    def digest(self) -> str:
        payload = {
            "seed": self.seed,
            "session": asdict(self.session),
            "cone": asdict(self.cone),
            "diffusion": asdict(self.diffusion),
            "smoothing": asdict(self.smoothing),
            "metric_level": self.metric_level,
        }
        return short_digest(payload)

    def validate_paths(self) -> None:
        missing = [m for m in self.meshes if not os.path.isfile(m)]
        if self.gaze_log and not os.path.isfile(self.gaze_log):
            missing.append(self.gaze_log)
        if missing:
            raise ConfigError("missing input files: " + ", ".join(missing))


def _take(mapping: dict, allowed: set, where: str) -> dict:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return {k: v for k, v in mapping.items() if v is not None}


def _parse_fixation(entries) -> tuple:
    spans = []
    for e in entries:
        kw = _take(dict(e), {"start", "end", "target", "face"}, "fixation")
        spans.append(FixationSpan(t_start=float(kw["start"]),
                                  t_end=float(kw["end"]),
                                  target=kw.get("target"),
                                  face=kw.get("face")))
    return tuple(spans)


def load_run_config(path) -> RunConfig:
    """Parse and validate a YAML run configuration."""
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    try:
        return run_config_from_dict(doc)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def run_config_from_dict(doc: dict) -> RunConfig:
    top = _take(dict(doc), {
        "meshes", "output_dir", "seed", "deterministic", "threads",
        "ablation_grid", "export_hits", "export_face_fields", "gaze_log",
        "metric_level", "session", "cone", "diffusion", "smoothing"},
        "config")

    session_kw = _take(dict(top.pop("session", {})), {
        "duration_s", "frame_rate_hz", "turntable_deg_s", "subjects",
        "gaze_noise_deg", "orbit_radius", "fixation"}, "session")
    if "fixation" in session_kw:
        session_kw["fixation_script"] = _parse_fixation(
            session_kw.pop("fixation"))
    cone_kw = _take(dict(top.pop("cone", {})), {
        "aperture_deg", "spread_sigma_deg", "rays_per_sample", "mode",
        "backface_threshold"}, "cone")
    diff_kw = _take(dict(top.pop("diffusion", {})), {
        "sigma", "d_max", "metric", "hop_sigma"}, "diffusion")
    smooth_kw = _take(dict(top.pop("smoothing", {})), {
        "blend", "iterations", "gamma", "colormap"}, "smoothing")

    meshes = top.pop("meshes", [])
    if isinstance(meshes, str):
        meshes = [meshes]
    return RunConfig(
        meshes=[str(m) for m in meshes],
        session=SessionConfig(**session_kw),
        cone=ConeConfig(**cone_kw),
        diffusion=DiffusionConfig(**diff_kw),
        smoothing=SmoothConfig(**smooth_kw),
        **top)
