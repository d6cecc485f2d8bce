"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``MINMAX_LAB_PURE=1`` to force the numpy versions.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MINMAX_LAB_PURE") != "1":
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]

        _impl = _compiled
        BACKEND = "cython"
    except ImportError:
        pass

color_interval_grid = _impl.color_interval_grid
first_panchromatic = _impl.first_panchromatic
grid_scan = _impl.grid_scan

# numpy helpers used by both backends
interval_bounds = _kernels_py.interval_bounds
interval_selector = _kernels_py.interval_selector
colors_from_displacement = _kernels_py.colors_from_displacement
grid_vertices = _kernels_py.grid_vertices


def backends():
    """Available implementations keyed by name (for tests and benchmarks)."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]

        out["cython"] = _compiled
    except ImportError:
        pass
    return out
