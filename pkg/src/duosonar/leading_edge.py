"""Per-beam leading-edge extraction producing planar line scans.

For every beam column the leading edge is the smallest range whose
intensity strictly exceeds a threshold; the edge is reported at the bin
center and projected onto the sonar's zero-elevation plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .sonar import PolarSonarImage, project_planar_array

DEFAULT_TAU_HORIZONTAL = 80.0
DEFAULT_TAU_VERTICAL = 130.0


@dataclass(frozen=True)
class LineScan:
    """Planar line-scan point cloud in the emitting sonar's own frame.

    One point at most per beam column; ``xyz`` rows are (x, y, 0).
    """

    xyz: np.ndarray
    intensities: np.ndarray
    bearings: np.ndarray
    columns: np.ndarray
    source: str = "horizontal"
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        for name in ("xyz", "intensities", "bearings", "columns"):
            arr = np.asarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.xyz.shape != (len(self.columns), 3):
            raise ValueError("xyz must be (N, 3) matching columns")

    def __len__(self) -> int:
        return self.xyz.shape[0]


def detect_leading_edge(img: PolarSonarImage, tau: float, source: str = "horizontal") -> LineScan:
    """Extract the leading edge of every beam column of a preprocessed frame.

    Columns without any bin strictly above ``tau`` emit nothing. The edge
    range is the detected bin's center.
    """
    if not 0 < tau < 256:
        raise ValueError(f"tau must lie in (0, 256), got {tau}")
    intr = img.intrinsics
    bins = kernels.leading_edge_bins(img.data, float(tau))
    cols = np.nonzero(bins >= 0)[0]
    edge_bins = bins[cols]
    ranges = intr.range_of_bin(edge_bins)
    bearings = intr.bearings()[cols]
    xyz = project_planar_array(ranges, bearings)
    intensities = img.data[edge_bins, cols]
    return LineScan(
        xyz=xyz,
        intensities=intensities,
        bearings=bearings,
        columns=cols,
        source=source,
        timestamp=img.timestamp,
    )
