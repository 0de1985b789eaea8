"""Precomputed 256-stop colormaps with linear interpolation.

Tables ship as .npy data files (float64, 256x3, in [0,1]) so colorization
is bit-exact across installs; value 0 maps to the first stop and value 1 to
the last, exactly.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

_CACHE: dict[str, np.ndarray] = {}

_FILE_BACKED = ("viridis", "magma", "plasma")


def available_colormaps() -> tuple:
    return _FILE_BACKED + ("gray",)


def get_colormap(name: str) -> np.ndarray:
    """The (256, 3) float stop table for ``name``."""
    if name in _CACHE:
        return _CACHE[name]
    if name == "gray":
        ramp = np.linspace(0.0, 1.0, 256)
        table = np.stack([ramp, ramp, ramp], axis=1)
    elif name in _FILE_BACKED:
        ref = resources.files("meshsal.data").joinpath(f"{name}256.npy")
        with resources.as_file(ref) as p:
            table = np.load(p)
    else:
        raise ValueError(f"unknown colormap {name!r}; "
                         f"available: {available_colormaps()}")
    _CACHE[name] = table
    return table


def apply_colormap(values01: np.ndarray, name: str) -> np.ndarray:
    """Map values in [0, 1] to 8-bit RGB via linear stop interpolation."""
    table = get_colormap(name)
    v = np.clip(np.asarray(values01, dtype=np.float64), 0.0, 1.0)
    x = v * 255.0
    i0 = np.minimum(x.astype(np.int64), 254)
    frac = x - i0
    rgb = table[i0] * (1.0 - frac[:, None]) + table[i0 + 1] * frac[:, None]
    return np.round(rgb * 255.0).astype(np.uint8)
