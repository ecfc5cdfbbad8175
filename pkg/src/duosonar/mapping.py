"""Keyframes, constant-velocity pose interpolation, and map assembly.

Trajectories come from an external odometry source (simulator or file).
Sonar points are attached at motion-interpolated poses between trajectory
samples; LiDAR scans are attached at their keyframe poses. The assembled
map is a single world-frame cloud whose points carry a source-channel tag.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .geometry import RigidTransform

QUAT_NORM_TOL = 1e-9

CHANNEL_LIDAR = 0
CHANNEL_STEREO = 1
CHANNEL_EDGE_H = 2
CHANNEL_EDGE_V = 3
CHANNEL_NAMES = {
    CHANNEL_LIDAR: "lidar",
    CHANNEL_STEREO: "stereo",
    CHANNEL_EDGE_H: "edge_h",
    CHANNEL_EDGE_V: "edge_v",
}
CHANNEL_CODES = {name: code for code, name in CHANNEL_NAMES.items()}


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion in (x, y, z, w) order."""
    x, y, z, w = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    half = angle_rad / 2.0
    return np.array([*(axis * math.sin(half)), math.cos(half)])


def quat_from_yaw(yaw_rad: float) -> np.ndarray:
    return quat_from_axis_angle((0.0, 0.0, 1.0), yaw_rad)


def quat_slerp(q0: np.ndarray, q1: np.ndarray, frac: float) -> np.ndarray:
    """Shortest-geodesic spherical interpolation between unit quaternions."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    dot = min(dot, 1.0)
    if dot > 1.0 - 1e-12:
        # nearly parallel: linear blend avoids 0/0 in the sine ratio
        return quat_normalize(q0 + frac * (q1 - q0))
    omega = math.acos(dot)
    s = math.sin(omega)
    return (math.sin((1.0 - frac) * omega) / s) * q0 + (math.sin(frac * omega) / s) * q1


def quat_rotation_angle(q0: np.ndarray, q1: np.ndarray) -> float:
    """Angle of the relative rotation between two unit quaternions."""
    dot = abs(float(np.dot(q0, q1)))
    return 2.0 * math.acos(min(dot, 1.0))


@dataclass(frozen=True)
class Pose:
    """Timestamped world-frame pose; quaternion in (x, y, z, w) order."""

    timestamp: float
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        q = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(q) - 1.0) > QUAT_NORM_TOL:
            raise ValueError("quaternion must be unit norm")
        q = q.copy()
        t = t.copy()
        q.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", q)
        object.__setattr__(self, "translation", t)

    def as_transform(self) -> RigidTransform:
        return RigidTransform(rotation=quat_to_matrix(self.rotation), translation=self.translation)


def interpolate_pose(t: float, p0: Pose, p1: Pose) -> Pose:
    """Constant-velocity pose at time t between two bracketing poses.

    Translation interpolates linearly, rotation along the shortest geodesic,
    both with the same fraction. Bracket endpoints are returned exactly.
    """
    if not p0.timestamp < p1.timestamp:
        raise ValueError("bracket must satisfy p0.timestamp < p1.timestamp")
    if t < p0.timestamp or t > p1.timestamp:
        raise ValueError(f"extrapolation refused: {t} outside [{p0.timestamp}, {p1.timestamp}]")
    if t == p0.timestamp:
        return p0
    if t == p1.timestamp:
        return p1
    frac = (t - p0.timestamp) / (p1.timestamp - p0.timestamp)
    translation = (1.0 - frac) * p0.translation + frac * p1.translation
    rotation = quat_normalize(quat_slerp(p0.rotation, p1.rotation, frac))
    return Pose(timestamp=t, rotation=rotation, translation=translation)


class Trajectory:
    """Time-ordered pose sequence with bracketed interpolation."""

    def __init__(self, poses: Iterable[Pose]):
        poses = sorted(poses, key=lambda p: p.timestamp)
        if not poses:
            raise ValueError("trajectory must contain at least one pose")
        times = [p.timestamp for p in poses]
        if len(set(times)) != len(times):
            raise ValueError("trajectory timestamps must be unique")
        self.poses = poses
        self._times = times

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def t_start(self) -> float:
        return self._times[0]

    @property
    def t_end(self) -> float:
        return self._times[-1]

    def contains(self, t: float) -> bool:
        return self.t_start <= t <= self.t_end

    def pose_at(self, t: float) -> Pose:
        """Pose interpolated between the two trajectory samples bracketing t."""
        if not self.contains(t):
            raise ValueError(f"time {t} outside trajectory span [{self.t_start}, {self.t_end}]")
        i = bisect.bisect_left(self._times, t)
        if i < len(self._times) and self._times[i] == t:
            return self.poses[i]
        return interpolate_pose(t, self.poses[i - 1], self.poses[i])


@dataclass(frozen=True)
class KeyframeThresholds:
    translation_m: float = 1.0
    rotation_rad: float = 0.05


@dataclass(frozen=True)
class Keyframe:
    id: int
    pose: Pose
    scan_ref: Optional[int] = None


def keyframe_due(last: Pose, candidate: Pose, thresholds: KeyframeThresholds) -> bool:
    """True when motion since the last keyframe reaches either threshold."""
    dist = float(np.linalg.norm(candidate.translation - last.translation))
    angle = quat_rotation_angle(last.rotation, candidate.rotation)
    return dist >= thresholds.translation_m or angle >= thresholds.rotation_rad


def insert_keyframe_if_due(
    last: "Keyframe", candidate: Pose, thresholds: KeyframeThresholds
) -> Optional["Keyframe"]:
    """New keyframe for ``candidate`` when motion since ``last`` reaches a threshold."""
    if not keyframe_due(last.pose, candidate, thresholds):
        return None
    return Keyframe(id=last.id + 1, pose=candidate)


def select_keyframes(
    trajectory: Trajectory, thresholds: KeyframeThresholds = KeyframeThresholds()
) -> list[Keyframe]:
    """Keyframe subset of a trajectory; the first pose is always keyframe 0."""
    keyframes = [Keyframe(id=0, pose=trajectory.poses[0])]
    for pose in trajectory.poses[1:]:
        kf = insert_keyframe_if_due(keyframes[-1], pose, thresholds)
        if kf is not None:
            keyframes.append(kf)
    return keyframes


@dataclass
class SeabedSkyMap:
    """Accumulated world-frame point cloud tagged by source channel."""

    _xyz: list[np.ndarray] = field(default_factory=list)
    _channels: list[np.ndarray] = field(default_factory=list)
    _timestamps: list[np.ndarray] = field(default_factory=list)
    keyframes: list[Keyframe] = field(default_factory=list)
    rejected_count: int = 0

    def add_points(self, xyz: np.ndarray, channel: int, timestamp: float) -> None:
        xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
        if xyz.shape[0] == 0:
            return
        self._xyz.append(xyz)
        self._channels.append(np.full(xyz.shape[0], channel, dtype=np.uint8))
        self._timestamps.append(np.full(xyz.shape[0], timestamp))

    def points(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(xyz, channel, timestamp) arrays over every stored point."""
        if not self._xyz:
            return np.zeros((0, 3)), np.zeros(0, dtype=np.uint8), np.zeros(0)
        return (
            np.concatenate(self._xyz),
            np.concatenate(self._channels),
            np.concatenate(self._timestamps),
        )

    def channel_counts(self) -> dict[str, int]:
        _, channels, _ = self.points()
        return {
            name: int((channels == code).sum()) for code, name in CHANNEL_NAMES.items()
        }

    def __len__(self) -> int:
        return sum(a.shape[0] for a in self._xyz)


def attach_sonar_data(
    smap: SeabedSkyMap,
    xyz_sensor: np.ndarray,
    timestamps: np.ndarray,
    sensor_to_body: RigidTransform,
    trajectory: Trajectory,
    channel: int,
) -> tuple[int, int]:
    """Attach sonar points at their motion-interpolated world poses.

    Each point is transformed sensor -> body -> world at its own timestamp.
    Points stamped outside the trajectory span are rejected and counted.
    Returns (accepted, rejected).
    """
    xyz_sensor = np.asarray(xyz_sensor, dtype=np.float64).reshape(-1, 3)
    timestamps = np.asarray(timestamps, dtype=np.float64).reshape(-1)
    if xyz_sensor.shape[0] != timestamps.shape[0]:
        raise ValueError("one timestamp per point required")
    accepted = rejected = 0
    for t in np.unique(timestamps):
        pts = xyz_sensor[timestamps == t]
        if not trajectory.contains(float(t)):
            rejected += pts.shape[0]
            continue
        body_to_world = trajectory.pose_at(float(t)).as_transform()
        world = body_to_world.apply(sensor_to_body.apply(pts))
        smap.add_points(world, channel, float(t))
        accepted += pts.shape[0]
    smap.rejected_count += rejected
    return accepted, rejected


def attach_lidar_scan(smap: SeabedSkyMap, scan_xyz: np.ndarray, pose: Pose) -> int:
    """Attach a body-frame LiDAR scan at its keyframe pose; returns point count."""
    scan_xyz = np.asarray(scan_xyz, dtype=np.float64).reshape(-1, 3)
    world = pose.as_transform().apply(scan_xyz) if scan_xyz.shape[0] else scan_xyz
    smap.add_points(world, CHANNEL_LIDAR, pose.timestamp)
    return scan_xyz.shape[0]
