"""Hot per-frame kernels with a compiled core and a numpy fallback.

The compiled extension (``duosonar.kernels._native``) is built at install
time when a C toolchain is available; otherwise the numpy implementations
in :mod:`duosonar.kernels.pure` are used. ``BACKEND`` records which one was
selected. Set the environment variable ``DUOSONAR_FORCE_PURE=1`` before
import to skip the extension (used by the benchmark and tests).
"""

from __future__ import annotations

import importlib
import os

from . import pure

_native = None
if not os.environ.get("DUOSONAR_FORCE_PURE"):
    try:
        _native = importlib.import_module("duosonar.kernels._native")
    except ImportError:
        _native = None

if _native is not None:
    BACKEND = "native"
    median_filter2d = _native.median_filter2d
    grayscale_open2d = _native.grayscale_open2d
    soca_cfar_mask = _native.soca_cfar_mask
    leading_edge_bins = _native.leading_edge_bins
    dbscan_labels = _native.dbscan_labels
    solve_assignment = _native.solve_assignment
else:
    BACKEND = "pure"
    median_filter2d = pure.median_filter2d
    grayscale_open2d = pure.grayscale_open2d
    soca_cfar_mask = pure.soca_cfar_mask
    leading_edge_bins = pure.leading_edge_bins
    dbscan_labels = pure.dbscan_labels
    solve_assignment = pure.solve_assignment

__all__ = [
    "BACKEND",
    "median_filter2d",
    "grayscale_open2d",
    "soca_cfar_mask",
    "leading_edge_bins",
    "dbscan_labels",
    "solve_assignment",
    "pure",
]
