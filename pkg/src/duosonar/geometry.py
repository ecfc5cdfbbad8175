"""Rigid transforms between sonar frames and overlap-region trimming.

The vertical sonar is related to the horizontal one by a fixed -90 degree
roll about the x-axis plus an arbitrary translation, so heterogeneous,
non co-located sonar heads are supported. All association downstream runs
in the horizontal sonar frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sonar import SonarIntrinsics

ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    """Proper rigid transform p' = R p + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        rot = np.asarray(self.rotation, dtype=np.float64)
        tr = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if rot.shape != (3, 3):
            raise ValueError("rotation must be 3x3")
        if np.abs(rot.T @ rot - np.eye(3)).max() > ORTHONORMAL_TOL:
            raise ValueError("rotation must be orthonormal")
        if np.linalg.det(rot) < 0:
            raise ValueError("rotation must be proper (det +1)")
        rot = rot.copy()
        tr = tr.copy()
        rot.flags.writeable = False
        tr.flags.writeable = False
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    @classmethod
    def from_axis_angle(
        cls, axis, angle_deg: float, translation=(0.0, 0.0, 0.0)
    ) -> "RigidTransform":
        """Rodrigues rotation about ``axis`` by ``angle_deg`` degrees."""
        axis = np.asarray(axis, dtype=np.float64)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError("rotation axis must be nonzero")
        k = axis / norm
        a = math.radians(angle_deg)
        kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        rot = np.eye(3) + math.sin(a) * kx + (1.0 - math.cos(a)) * (kx @ kx)
        return cls(rotation=rot, translation=np.asarray(translation, dtype=np.float64))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform one (3,) point or an (N, 3) batch."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self o other: apply ``other`` first, then ``self``."""
        return RigidTransform(
            rotation=self.rotation @ other.rotation,
            translation=self.rotation @ other.translation + self.translation,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rotation=rt, translation=-(rt @ self.translation))


@dataclass(frozen=True)
class SonarExtrinsics:
    """Mounting relation mapping vertical-sonar coordinates to the horizontal frame."""

    vertical_to_horizontal: RigidTransform

    @classmethod
    def default(cls, translation=(0.0, 0.0, 0.0)) -> "SonarExtrinsics":
        """Fixed -90 degree roll about x with an arbitrary translation."""
        return cls(RigidTransform.from_axis_angle((1.0, 0.0, 0.0), -90.0, translation))


def vertical_points_to_horizontal_frame(
    points: np.ndarray, ext: SonarExtrinsics
) -> np.ndarray:
    """Map (N, 3) vertical-frame points into the horizontal sonar frame."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    return ext.vertical_to_horizontal.apply(pts)


def in_frustum(points: np.ndarray, intrinsics: SonarIntrinsics) -> np.ndarray:
    """Membership of (N, 3) sensor-frame points in the sonar's viewing frustum.

    The frustum is the bearing wedge [bearing_min, bearing_max] crossed
    with the elevation wedge [-aperture/2, +aperture/2], out to max_range.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    planar = np.hypot(x, y)
    rng = np.sqrt(x * x + y * y + z * z)
    bearing = np.arctan2(y, x)
    elevation = np.arctan2(z, planar)
    half_ap = intrinsics.vertical_aperture / 2.0
    return (
        (rng <= intrinsics.max_range)
        & (rng >= intrinsics.blanking)
        & (bearing >= intrinsics.bearing_min)
        & (bearing <= intrinsics.bearing_max)
        & (np.abs(elevation) <= half_ap)
    )


def overlap_mask(
    points_h_frame: np.ndarray,
    ext: SonarExtrinsics,
    h_intrinsics: SonarIntrinsics,
    v_intrinsics: SonarIntrinsics,
) -> np.ndarray:
    """True where a horizontal-frame point lies inside both sonar frusta."""
    pts = np.asarray(points_h_frame, dtype=np.float64).reshape(-1, 3)
    in_h = in_frustum(pts, h_intrinsics)
    pts_v = ext.vertical_to_horizontal.inverse().apply(pts)
    return in_h & in_frustum(pts_v, v_intrinsics)


def trim_to_overlap(
    h_points: np.ndarray,
    v_points: np.ndarray,
    ext: SonarExtrinsics,
    h_intrinsics: SonarIntrinsics,
    v_intrinsics: SonarIntrinsics,
) -> tuple[np.ndarray, np.ndarray]:
    """Keep only the points of each set inside the two frusta's intersection.

    Both inputs must already be expressed in the horizontal frame. Use
    :func:`overlap_mask` directly when parallel arrays must be subset too.
    """
    h_pts = np.asarray(h_points, dtype=np.float64).reshape(-1, 3)
    v_pts = np.asarray(v_points, dtype=np.float64).reshape(-1, 3)
    h_keep = overlap_mask(h_pts, ext, h_intrinsics, v_intrinsics)
    v_keep = overlap_mask(v_pts, ext, h_intrinsics, v_intrinsics)
    return h_pts[h_keep], v_pts[v_keep]
