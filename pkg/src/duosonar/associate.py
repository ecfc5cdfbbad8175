"""Cross-sonar association: cluster matching, feature matching, fusion.

Clusters are compared by (mean, variance, min, max) of their x-coordinates
in the horizontal frame. Features inside a matched cluster pair are
compared by their x-coordinate, intensity, and 3-cell neighborhood
intensity means along the two polar-image axes; the vertical sonar's
descriptor swaps the two means to account for the orthogonal mounting.
Both stages solve a global minimum-cost bijective assignment; matched
features fuse by coordinate averaging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .detect import (
    NOISE,
    CfarConfig,
    DbscanConfig,
    FeaturePoint,
    dbscan,
    extract_features,
    features_xyz,
)
from .geometry import SonarExtrinsics, overlap_mask
from .sonar import PolarSonarImage


@dataclass(frozen=True)
class ClusterDescriptor:
    """Summary of a cluster's x-extent: mean, population variance, min, max."""

    mu: float
    sigma2: float
    x_min: float
    x_max: float

    def as_array(self) -> np.ndarray:
        return np.array([self.mu, self.sigma2, self.x_min, self.x_max])


@dataclass(frozen=True)
class FeatureDescriptor:
    x: float
    gamma: float
    gamma_bar_a: float
    gamma_bar_b: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.gamma, self.gamma_bar_a, self.gamma_bar_b])


@dataclass(frozen=True)
class FusedPoint:
    """Average of one horizontal and one vertical feature, horizontal frame."""

    x: float
    y: float
    z: float
    h_id: int
    v_id: int

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def cluster_descriptor(members: list[FeaturePoint]) -> ClusterDescriptor:
    """Descriptor over the member x-coordinates; raises on an empty cluster."""
    if not members:
        raise ValueError("cluster must have at least one member")
    xs = np.array([f.x for f in members])
    return ClusterDescriptor(
        mu=float(xs.mean()),
        sigma2=float(xs.var()),
        x_min=float(xs.min()),
        x_max=float(xs.max()),
    )


def _canonicalize_ties(assignment: list[tuple[int, int]], cost: np.ndarray) -> list[tuple[int, int]]:
    """Swap equal-cost pairs toward the lexicographically smallest pairing.

    Only swaps that leave the summed cost exactly unchanged are applied, so
    optimality is preserved; uniquely-optimal assignments are returned as is.
    """
    pairs = sorted(assignment)
    changed = True
    while changed:
        changed = False
        for a in range(len(pairs)):
            for b in range(a + 1, len(pairs)):
                (ra, ca), (rb, cb) = pairs[a], pairs[b]
                if ca <= cb:
                    continue
                if cost[ra, ca] + cost[rb, cb] == cost[ra, cb] + cost[rb, ca]:
                    pairs[a], pairs[b] = (ra, cb), (rb, ca)
                    changed = True
    return pairs


def match_minimum_cost(cost: np.ndarray) -> list[tuple[int, int]]:
    """Bijective (row, col) pairs minimizing the summed cost.

    Pairs min(n, m) rows with columns; leftovers on the larger side stay
    unmatched. Exact cost ties are broken toward the lexicographically
    smallest pairing.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        return []
    col_of = kernels.solve_assignment(cost)
    pairs = [(r, int(c)) for r, c in enumerate(col_of) if c >= 0]
    return _canonicalize_ties(pairs, cost)


def match_clusters(
    h_descriptors: list[ClusterDescriptor], v_descriptors: list[ClusterDescriptor]
) -> list[tuple[int, int]]:
    """One-to-one cluster pairing minimizing total descriptor L2 distance."""
    if not h_descriptors or not v_descriptors:
        return []
    h = np.array([d.as_array() for d in h_descriptors])
    v = np.array([d.as_array() for d in v_descriptors])
    cost = np.linalg.norm(h[:, None, :] - v[None, :, :], axis=2)
    return match_minimum_cost(cost)


def feature_descriptor(
    f: FeaturePoint, img: PolarSonarImage, neighborhood: int = 3
) -> FeatureDescriptor:
    """Descriptor (x, intensity, axis means) of one feature in its source frame.

    The neighborhood means run over ``neighborhood`` cells centered on the
    feature along the range axis and along the bearing axis, replicating at
    the borders; vertical-source descriptors swap the two means.
    """
    if neighborhood < 1 or neighborhood % 2 == 0:
        raise ValueError("neighborhood must be odd and positive")
    r, c = f.polar_origin
    data = img.data
    n_rows, n_cols = data.shape
    if not (0 <= r < n_rows and 0 <= c < n_cols):
        raise ValueError(f"polar_origin {f.polar_origin} outside image {data.shape}")
    half = neighborhood // 2
    rows = np.clip(np.arange(r - half, r + half + 1), 0, n_rows - 1)
    cols = np.clip(np.arange(c - half, c + half + 1), 0, n_cols - 1)
    mean_range_axis = float(data[rows, c].mean())
    mean_bearing_axis = float(data[r, cols].mean())
    if f.source == "vertical":
        mean_range_axis, mean_bearing_axis = mean_bearing_axis, mean_range_axis
    return FeatureDescriptor(
        x=f.x, gamma=f.intensity, gamma_bar_a=mean_range_axis, gamma_bar_b=mean_bearing_axis
    )


def match_features(
    h_members: list[FeaturePoint],
    v_members: list[FeaturePoint],
    h_img: PolarSonarImage,
    v_img: PolarSonarImage,
    neighborhood: int = 3,
) -> list[tuple[int, int]]:
    """Bijective feature pairing within one matched cluster pair.

    Returns index pairs into (h_members, v_members); min(|H|, |V|) pairs.
    """
    if not h_members or not v_members:
        return []
    h = np.array([feature_descriptor(f, h_img, neighborhood).as_array() for f in h_members])
    v = np.array([feature_descriptor(f, v_img, neighborhood).as_array() for f in v_members])
    cost = np.linalg.norm(h[:, None, :] - v[None, :, :], axis=2)
    return match_minimum_cost(cost)


def fuse(h: FeaturePoint, v: FeaturePoint, h_id: int = -1, v_id: int = -1) -> FusedPoint:
    """Componentwise coordinate average of two matched features."""
    return FusedPoint(
        x=(h.x + v.x) / 2.0,
        y=(h.y + v.y) / 2.0,
        z=(h.z + v.z) / 2.0,
        h_id=h_id,
        v_id=v_id,
    )


@dataclass(frozen=True)
class StereoConfig:
    h_cfar: CfarConfig
    v_cfar: CfarConfig
    dbscan: DbscanConfig
    descriptor_neighborhood: int = 3


def stereo_pipeline(
    h_img: PolarSonarImage,
    v_img: PolarSonarImage,
    ext: SonarExtrinsics,
    cfg: StereoConfig,
) -> list[FusedPoint]:
    """Full dual-sonar fusion of one preprocessed frame pair.

    CFAR detections from each frame are projected onto their sonar's plane,
    the vertical set is transformed into the horizontal frame, both sets
    are trimmed to the frusta overlap, clustered, associated cluster-then-
    feature level, and fused into 3-D points.
    """
    h_feats = extract_features(h_img, cfg.h_cfar, source="horizontal")
    v_feats = extract_features(v_img, cfg.v_cfar, source="vertical")

    v_xyz = ext.vertical_to_horizontal.apply(features_xyz(v_feats)) if v_feats else np.zeros((0, 3))
    for f, p in zip(v_feats, v_xyz):
        f.x, f.y, f.z = float(p[0]), float(p[1]), float(p[2])

    h_keep = overlap_mask(features_xyz(h_feats), ext, h_img.intrinsics, v_img.intrinsics)
    v_keep = overlap_mask(v_xyz, ext, h_img.intrinsics, v_img.intrinsics)
    h_feats = [f for f, k in zip(h_feats, h_keep) if k]
    v_feats = [f for f, k in zip(v_feats, v_keep) if k]
    if not h_feats or not v_feats:
        return []

    dbscan(h_feats, cfg.dbscan)
    dbscan(v_feats, cfg.dbscan)

    h_clusters = _group_by_cluster(h_feats)
    v_clusters = _group_by_cluster(v_feats)
    if not h_clusters or not v_clusters:
        return []

    h_ids = sorted(h_clusters)
    v_ids = sorted(v_clusters)
    pairs = match_clusters(
        [cluster_descriptor(h_clusters[i]) for i in h_ids],
        [cluster_descriptor(v_clusters[j]) for j in v_ids],
    )

    fused: list[FusedPoint] = []
    for hi, vj in pairs:
        h_members = h_clusters[h_ids[hi]]
        v_members = v_clusters[v_ids[vj]]
        for a, b in match_features(
            h_members, v_members, h_img, v_img, cfg.descriptor_neighborhood
        ):
            fh, fv = h_members[a], v_members[b]
            fused.append(fuse(fh, fv, h_id=_feature_key(fh), v_id=_feature_key(fv)))
    return fused


def _group_by_cluster(features: list[FeaturePoint]) -> dict[int, list[FeaturePoint]]:
    groups: dict[int, list[FeaturePoint]] = {}
    for f in features:
        if f.cluster_id == NOISE:
            continue
        groups.setdefault(f.cluster_id, []).append(f)
    return groups


def _feature_key(f: FeaturePoint) -> int:
    """Stable id of a feature inside one frame: row-major polar index."""
    return f.polar_origin[0] * 100000 + f.polar_origin[1]
