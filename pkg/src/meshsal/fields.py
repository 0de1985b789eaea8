"""Scalar fields over mesh faces and vertices, tagged by pipeline stage."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

STAGES = ("raw", "diffused", "smoothed", "normalized")


def short_digest(payload) -> str:
    """12-hex-char digest of a JSON-serializable configuration payload."""
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class FaceField:
    """One scalar per face. Raw-stage values are hit counts (>= 0)."""

    values: np.ndarray
    stage: str
    provenance: str = ""

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.stage == "raw" and self.values.size and self.values.min() < 0:
            raise ValueError("raw face field must be non-negative")

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class VertexField:
    """One scalar per vertex. Normalized-stage values span [0, 1]."""

    values: np.ndarray
    stage: str
    provenance: str = ""

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.stage == "normalized" and self.values.size:
            lo = self.values.min()
            hi = self.values.max()
            if lo < -1e-12 or hi > 1.0 + 1e-12:
                raise ValueError("normalized vertex field outside [0, 1]")
            if hi > lo and (abs(lo) > 1e-12 or abs(hi - 1.0) > 1e-12):
                raise ValueError(
                    "non-constant normalized field must span [0, 1]")

    def __len__(self) -> int:
        return len(self.values)
