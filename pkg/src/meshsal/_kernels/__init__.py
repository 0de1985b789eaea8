"""Kernel backend selection.

The hot loops (BVH ray traversal, truncated geodesic expansion) exist twice:
a Cython extension (``_core``) and a pure numpy/heapq fallback (``pure``)
with identical semantics. The compiled backend is preferred; the fallback is
selected automatically when the extension is missing, or forced with
``MESHSAL_PURE=1``.
"""

import os

from . import pure as _pure

if os.environ.get("MESHSAL_PURE") == "1":
    _impl = _pure
    BACKEND = "pure"
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "pure"

bvh_nearest_hits = _impl.bvh_nearest_hits
geodesic_accumulate = _impl.geodesic_accumulate
geodesic_distances = _impl.geodesic_distances


def active_backend() -> str:
    """Name of the backend picked at import time: 'compiled' or 'pure'."""
    return BACKEND


def load_backend(name: str):
    """Explicitly fetch a backend module ('compiled' or 'pure').

    Used by the parity tests and the kernel benchmark; raises ImportError
    if the compiled extension was never built.
    """
    if name == "pure":
        return _pure
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
