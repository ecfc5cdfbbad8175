"""Feature detection: SOCA-CFAR on polar frames, DBSCAN on Cartesian points.

CFAR sweeps each beam column along the range axis and thresholds every
cell against the smaller of the leading/lagging reference-window means,
scaled by alpha = N * (pfa^(-1/N) - 1). Detections below the per-sonar
minimum intensity are discarded regardless of the CFAR ratio.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .sonar import PolarSonarImage, project_planar_array

UNCLUSTERED = -2
NOISE = -1


@dataclass(frozen=True)
class CfarConfig:
    reference_cells: int
    guard_cells: int
    pfa: float
    min_intensity: float

    def __post_init__(self) -> None:
        if self.reference_cells <= 0:
            raise ValueError("reference_cells must be positive")
        if self.guard_cells < 0:
            raise ValueError("guard_cells must be >= 0")
        if not 0.0 < self.pfa < 1.0:
            raise ValueError("pfa must lie in (0, 1)")

    @property
    def alpha(self) -> float:
        """CA-CFAR threshold multiplier for the configured false-alarm rate."""
        n = float(self.reference_cells)
        return n * (self.pfa ** (-1.0 / n) - 1.0)


def horizontal_cfar_defaults() -> CfarConfig:
    return CfarConfig(reference_cells=16, guard_cells=8, pfa=0.2, min_intensity=100.0)


def vertical_cfar_defaults() -> CfarConfig:
    return CfarConfig(reference_cells=24, guard_cells=8, pfa=0.2, min_intensity=130.0)


@dataclass(frozen=True)
class DbscanConfig:
    epsilon: float = 0.20
    min_samples: int = 20

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")


@dataclass
class FeaturePoint:
    """One CFAR detection carried through clustering and association.

    Coordinates are in the horizontal sonar frame once the stereo pipeline
    has transformed vertical-source features; ``polar_origin`` indexes the
    source polar image. ``cluster_id`` is UNCLUSTERED until DBSCAN runs,
    then a cluster index or NOISE.
    """

    x: float
    y: float
    z: float
    intensity: float
    source: str
    polar_origin: tuple[int, int]
    cluster_id: int = UNCLUSTERED

    def xyz(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def soca_cfar(img: PolarSonarImage, cfg: CfarConfig) -> list[tuple[int, int]]:
    """(range_bin, column) of every CFAR detection, in row-major order."""
    mask = kernels.soca_cfar_mask(
        img.data, cfg.reference_cells, cfg.guard_cells, cfg.alpha, cfg.min_intensity
    )
    return [(int(r), int(c)) for r, c in np.argwhere(mask)]


def extract_features(
    img: PolarSonarImage, cfg: CfarConfig, source: str
) -> list[FeaturePoint]:
    """CFAR detections projected onto the sonar's own zero-elevation plane."""
    mask = kernels.soca_cfar_mask(
        img.data, cfg.reference_cells, cfg.guard_cells, cfg.alpha, cfg.min_intensity
    )
    rc = np.argwhere(mask)
    if rc.size == 0:
        return []
    intr = img.intrinsics
    ranges = intr.range_of_bin(rc[:, 0])
    bearings = intr.bearings()[rc[:, 1]]
    xyz = project_planar_array(ranges, bearings)
    intensities = img.data[rc[:, 0], rc[:, 1]]
    return [
        FeaturePoint(
            x=float(p[0]),
            y=float(p[1]),
            z=float(p[2]),
            intensity=float(g),
            source=source,
            polar_origin=(int(r), int(c)),
        )
        for p, g, (r, c) in zip(xyz, intensities, rc)
    ]


def features_xyz(features: list[FeaturePoint]) -> np.ndarray:
    """(N, 3) coordinate matrix of a feature list."""
    if not features:
        return np.zeros((0, 3))
    return np.array([[f.x, f.y, f.z] for f in features])


def dbscan(points: np.ndarray | list[FeaturePoint], cfg: DbscanConfig) -> np.ndarray:
    """Cluster labels (noise = -1) for (N, 3) points or FeaturePoint lists.

    When given features, their ``cluster_id`` fields are updated in place.
    """
    feats: Optional[list[FeaturePoint]] = None
    if isinstance(points, list):
        feats = points
        xyz = features_xyz(points)
    else:
        xyz = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    labels = kernels.dbscan_labels(xyz, cfg.epsilon, cfg.min_samples)
    if feats is not None:
        for f, lab in zip(feats, labels):
            f.cluster_id = int(lab)
    return labels
