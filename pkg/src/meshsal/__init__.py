"""meshsal: gaze-driven 3D mesh saliency ground truth.

Pipeline: normalize a triangle mesh to unit bounding-box diagonal, expand
gaze samples into Gaussian view-cone ray bundles, cast them against a BVH,
diffuse the per-face hit counts along surface geodesics into a continuous
per-vertex saliency field, and evaluate against fixation densities.
"""

__version__ = "0.1.0"

from ._kernels import active_backend
from .bvh import RayAccel, RayHit, build_ray_accel, cast_rays, ray_nearest_hit
from .diffusion import (DiffusionConfig, SaliencyResult, SmoothConfig,
                        diffuse, face_to_vertex, finalize, laplacian_smooth,
                        run_pipeline, truncated_geodesic_field)
from .fields import FaceField, VertexField
from .gaze import (FixationSpan, GazeSample, SessionConfig, parse_gaze_log,
                   split_parity, synth_turntable_session, write_gaze_log)
from .mesh import (AdjacencyIndex, MeshLoadError, TriangleMesh,
                   build_adjacency, compute_face_normals,
                   connected_components, load_mesh, normalize_unit_diag,
                   save_ply)
from .metrics import (FixationSet, MetricReport, improvement_factor,
                      internal_consistency, kl_divergence, pearson_cc,
                      shuffled_auc)
from .sampling import (ConeConfig, HitLog, HitRecord, accumulate_raw,
                       backface_accept, cast_sample, cast_session,
                       cone_ray_direction, coverage, sample_spread_angle,
                       sample_spread_angles)

__all__ = [
    "__version__", "active_backend",
    "TriangleMesh", "AdjacencyIndex", "MeshLoadError", "load_mesh",
    "normalize_unit_diag", "compute_face_normals", "build_adjacency",
    "connected_components", "save_ply",
    "RayAccel", "RayHit", "build_ray_accel", "cast_rays", "ray_nearest_hit",
    "GazeSample", "SessionConfig", "FixationSpan", "parse_gaze_log",
    "write_gaze_log", "synth_turntable_session", "split_parity",
    "ConeConfig", "HitRecord", "HitLog", "sample_spread_angle",
    "sample_spread_angles", "cone_ray_direction", "backface_accept",
    "cast_sample", "cast_session", "accumulate_raw", "coverage",
    "FaceField", "VertexField",
    "DiffusionConfig", "SmoothConfig", "SaliencyResult",
    "truncated_geodesic_field", "diffuse", "face_to_vertex",
    "laplacian_smooth", "finalize", "run_pipeline",
    "FixationSet", "MetricReport", "pearson_cc", "kl_divergence",
    "shuffled_auc", "internal_consistency", "improvement_factor",
]
