"""Synthetic scenes, dual-sonar raycasting, and trajectory generation.

The simulator produces ground-truth-labeled polar frame pairs and
LiDAR-like scans for oracle-based validation of the pipeline. The
intensity model is reflectivity-scaled first-hit binning with no
multipath or attenuation; the elevation dimension is collapsed into the
beam column exactly as the physical projection does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import RigidTransform
from .mapping import Pose, Trajectory, quat_from_yaw
from .sonar import PolarSonarImage, SonarIntrinsics

RAY_EPS = 1e-9


@dataclass(frozen=True)
class PlanarPatch:
    """Bounded plane: corner point plus two edge vectors."""

    origin: np.ndarray
    edge_u: np.ndarray
    edge_v: np.ndarray
    reflectivity: float = 1.0

    def __post_init__(self) -> None:
        for name in ("origin", "edge_u", "edge_v"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64).reshape(3))
        if np.linalg.norm(np.cross(self.edge_u, self.edge_v)) < RAY_EPS:
            raise ValueError("patch edges must span a plane")
        if not 0.0 < self.reflectivity <= 1.0:
            raise ValueError("reflectivity must lie in (0, 1]")

    @property
    def normal(self) -> np.ndarray:
        n = np.cross(self.edge_u, self.edge_v)
        return n / np.linalg.norm(n)


@dataclass(frozen=True)
class AxisAlignedBox:
    min_corner: np.ndarray
    max_corner: np.ndarray
    reflectivity: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "min_corner", np.asarray(self.min_corner, dtype=np.float64).reshape(3))
        object.__setattr__(self, "max_corner", np.asarray(self.max_corner, dtype=np.float64).reshape(3))
        if not np.all(self.max_corner > self.min_corner):
            raise ValueError("box must have positive extent on every axis")
        if not 0.0 < self.reflectivity <= 1.0:
            raise ValueError("reflectivity must lie in (0, 1]")


@dataclass(frozen=True)
class Scene:
    surfaces: tuple = ()
    water_level: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "surfaces", tuple(self.surfaces))


@dataclass(frozen=True)
class NoiseModel:
    """Seeded speckle + per-row bias injection for preprocessing tests."""

    speckle_density: float = 0.0
    speckle_intensity: tuple[float, float] = (100.0, 255.0)
    row_bias_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.speckle_density <= 1.0:
            raise ValueError("speckle_density must lie in [0, 1]")


@dataclass(frozen=True)
class SonarGroundTruth:
    """Exact first-hit records behind every nonzero cell of a frame."""

    bins: np.ndarray
    columns: np.ndarray
    points_sensor: np.ndarray
    points_world: np.ndarray
    surface_indices: np.ndarray
    ranges: np.ndarray

    def cells(self) -> set[tuple[int, int]]:
        return set(zip(self.bins.tolist(), self.columns.tolist()))

    def __len__(self) -> int:
        return int(self.bins.shape[0])


def _intersect_patch(patch: PlanarPatch, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Hit distance per ray, +inf where the patch is missed."""
    n = patch.normal
    denom = dirs @ n
    offset = (patch.origin - origins) @ n
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(np.abs(denom) > RAY_EPS, offset / denom, np.inf)
        hit = origins + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
        rel = hit - patch.origin
        # patch-local coordinates from the edge-vector Gram system
        g = np.array(
            [
                [patch.edge_u @ patch.edge_u, patch.edge_u @ patch.edge_v],
                [patch.edge_v @ patch.edge_u, patch.edge_v @ patch.edge_v],
            ]
        )
        rhs = np.stack([rel @ patch.edge_u, rel @ patch.edge_v])
        uv = np.linalg.solve(g, rhs)
    inside = (
        (t > RAY_EPS)
        & (uv[0] >= -RAY_EPS)
        & (uv[0] <= 1.0 + RAY_EPS)
        & (uv[1] >= -RAY_EPS)
        & (uv[1] <= 1.0 + RAY_EPS)
    )
    return np.where(inside, t, np.inf)


def _intersect_box(box: AxisAlignedBox, origins: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Slab-method hit distance per ray, +inf where the box is missed."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(np.abs(dirs) > RAY_EPS, 1.0 / dirs, np.inf)
        t1 = (box.min_corner - origins) * inv
        t2 = (box.max_corner - origins) * inv
    # rays parallel to a slab miss unless the origin lies between the planes
    parallel = np.abs(dirs) <= RAY_EPS
    between = (origins >= box.min_corner) & (origins <= box.max_corner)
    t1 = np.where(parallel, np.where(between, -np.inf, np.inf), t1)
    t2 = np.where(parallel, np.where(between, np.inf, -np.inf), t2)
    t_near = np.minimum(t1, t2).max(axis=1)
    t_far = np.maximum(t1, t2).min(axis=1)
    t = np.where(t_near > RAY_EPS, t_near, t_far)
    return np.where((t_far >= t_near) & (t > RAY_EPS), t, np.inf)


def cast_rays(
    scene: Scene, origins: np.ndarray, dirs: np.ndarray, max_range: float
) -> tuple[np.ndarray, np.ndarray]:
    """First-hit distances and surface indices for unit-direction rays.

    Returns (t, surface_index); misses have t = +inf and index -1.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    dirs = np.asarray(dirs, dtype=np.float64).reshape(-1, 3)
    best_t = np.full(origins.shape[0], np.inf)
    best_idx = np.full(origins.shape[0], -1, dtype=np.int64)
    for idx, surface in enumerate(scene.surfaces):
        if isinstance(surface, PlanarPatch):
            t = _intersect_patch(surface, origins, dirs)
        else:
            t = _intersect_box(surface, origins, dirs)
        closer = t < best_t
        best_t[closer] = t[closer]
        best_idx[closer] = idx
    out_of_range = best_t > max_range
    best_t[out_of_range] = np.inf
    best_idx[out_of_range] = -1
    return best_t, best_idx


def raycast_sonar(
    scene: Scene,
    sensor_pose: RigidTransform,
    intrinsics: SonarIntrinsics,
    timestamp: float = 0.0,
    elevation_rays: int = 64,
) -> tuple[PolarSonarImage, SonarGroundTruth]:
    """Render one polar frame by casting an elevation fan per beam.

    Every beam casts ``elevation_rays`` rays across the vertical aperture;
    first-hit ranges collapse into the beam's column with intensity
    proportional to surface reflectivity. The ground truth records the
    exact 3-D hit point behind every contributing ray.
    """
    bearings = intrinsics.bearings()
    half_ap = intrinsics.vertical_aperture / 2.0
    elevations = np.linspace(-half_ap, half_ap, elevation_rays)

    theta, phi = np.meshgrid(bearings, elevations, indexing="ij")
    dirs_sensor = np.stack(
        [
            np.cos(phi) * np.cos(theta),
            np.cos(phi) * np.sin(theta),
            np.sin(phi),
        ],
        axis=-1,
    ).reshape(-1, 3)
    cols = np.repeat(np.arange(intrinsics.num_beams), elevation_rays)

    dirs_world = dirs_sensor @ sensor_pose.rotation.T
    origins = np.broadcast_to(sensor_pose.translation, dirs_world.shape)
    t_hit, surf_idx = cast_rays(scene, origins, dirs_world, intrinsics.max_range)

    valid = np.isfinite(t_hit) & (t_hit >= intrinsics.blanking)
    ranges = t_hit[valid]
    hit_cols = cols[valid]
    hit_surf = surf_idx[valid]
    bins = np.floor((ranges - intrinsics.blanking) / intrinsics.range_resolution).astype(np.int64)
    np.clip(bins, 0, intrinsics.num_range_bins - 1, out=bins)

    reflectivities = np.array(
        [s.reflectivity for s in scene.surfaces], dtype=np.float64
    ) if scene.surfaces else np.zeros(0)
    data = np.zeros((intrinsics.num_range_bins, intrinsics.num_beams))
    if ranges.size:
        intensity = reflectivities[hit_surf] * intrinsics.max_intensity
        np.maximum.at(data, (bins, hit_cols), intensity)

    points_world = origins[valid] + ranges[:, None] * dirs_world[valid]
    points_sensor = dirs_sensor[valid] * ranges[:, None]
    truth = SonarGroundTruth(
        bins=bins,
        columns=hit_cols,
        points_sensor=points_sensor,
        points_world=points_world,
        surface_indices=hit_surf,
        ranges=ranges,
    )
    image = PolarSonarImage(intrinsics=intrinsics, data=data, timestamp=timestamp)
    return image, truth


def raycast_lidar(
    scene: Scene, sensor_pose: RigidTransform, directions: np.ndarray, max_range: float = 100.0
) -> np.ndarray:
    """World-frame first-hit points above the water level, (N, 3)."""
    dirs = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs_world = dirs @ sensor_pose.rotation.T
    origins = np.broadcast_to(sensor_pose.translation, dirs_world.shape)
    t_hit, _ = cast_rays(scene, origins, dirs_world, max_range)
    valid = np.isfinite(t_hit)
    pts = origins[valid] + t_hit[valid, None] * dirs_world[valid]
    return pts[pts[:, 2] > scene.water_level]


def lidar_ray_pattern(
    azimuth_steps: int = 64, elevation_angles_deg: Sequence[float] = (0.0, 10.0, 20.0, 30.0)
) -> np.ndarray:
    """Rotating-scanner ray fan: full azimuth circle at fixed elevations."""
    az = np.linspace(-math.pi, math.pi, azimuth_steps, endpoint=False)
    rays = []
    for el_deg in elevation_angles_deg:
        el = math.radians(el_deg)
        rays.append(
            np.stack([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.full_like(az, math.sin(el))], axis=1)
        )
    return np.concatenate(rays)


def apply_noise(img: PolarSonarImage, model: NoiseModel) -> PolarSonarImage:
    """Seeded speckle and row-bias injection; density 0 returns the input."""
    if model.speckle_density == 0.0 and model.row_bias_amplitude == 0.0:
        return img
    rng = np.random.default_rng(model.seed)
    data = np.array(img.data)
    n_rows, n_cols = data.shape
    if model.row_bias_amplitude > 0.0:
        data += rng.uniform(0.0, model.row_bias_amplitude, size=n_rows)[:, None]
    if model.speckle_density > 0.0:
        count = int(round(model.speckle_density * data.size))
        flat = rng.choice(data.size, size=count, replace=False)
        lo, hi = model.speckle_intensity
        data.ravel()[flat] = rng.uniform(lo, hi, size=count)
    np.clip(data, 0.0, img.intrinsics.max_intensity, out=data)
    return img.with_data(data)


@dataclass(frozen=True)
class TrajectoryParams:
    """Parameters of the built-in constant-speed trajectory generators."""

    kind: str = "line"
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    direction: tuple[float, float, float] = (1.0, 0.0, 0.0)
    length_m: float = 10.0
    speed_mps: float = 1.0
    rate_hz: float = 10.0
    t_start: float = 0.0
    # arc parameters
    radius_m: float = 5.0
    arc_angle_rad: float = math.pi / 2.0
    # lawnmower parameters
    leg_length_m: float = 10.0
    leg_spacing_m: float = 2.0
    num_legs: int = 3

    def __post_init__(self) -> None:
        if self.kind not in ("line", "arc", "lawnmower"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.speed_mps <= 0 or self.rate_hz <= 0:
            raise ValueError("speed and rate must be positive")
        if self.kind == "arc" and self.radius_m <= 0:
            raise ValueError("arc radius must be positive")
        if self.kind == "lawnmower" and (self.num_legs < 1 or self.leg_length_m <= 0):
            raise ValueError("lawnmower needs >= 1 leg of positive length")


def _polyline_trajectory(
    waypoints: np.ndarray, speed: float, rate: float, t0: float
) -> Trajectory:
    """Constant-speed resampling of a waypoint polyline with tangent heading."""
    seg = np.diff(waypoints, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    keep = seg_len > 0
    seg, seg_len = seg[keep], seg_len[keep]
    total = float(seg_len.sum())
    if total == 0.0:
        pose = Pose(timestamp=t0, rotation=quat_from_yaw(0.0), translation=waypoints[0])
        return Trajectory([pose])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    starts = waypoints[:-1][keep]
    yaws = np.arctan2(seg[:, 1], seg[:, 0])
    n = int(round(total / speed * rate)) + 1
    poses = []
    for i in range(n):
        s = min(i * speed / rate, total)
        k = min(int(np.searchsorted(cum, s, side="right")) - 1, len(seg_len) - 1)
        frac = (s - cum[k]) / seg_len[k]
        pos = starts[k] + frac * seg[k]
        poses.append(
            Pose(timestamp=t0 + i / rate, rotation=quat_from_yaw(float(yaws[k])), translation=pos)
        )
    return Trajectory(poses)


def generate_trajectory(params: TrajectoryParams) -> Trajectory:
    """Timestamped constant-speed trajectory of the requested pattern."""
    start = np.asarray(params.start, dtype=np.float64)
    if params.kind == "line":
        direction = np.asarray(params.direction, dtype=np.float64)
        norm = np.linalg.norm(direction)
        if norm == 0:
            raise ValueError("line direction must be nonzero")
        direction = direction / norm
        if params.length_m == 0.0:
            yaw = math.atan2(direction[1], direction[0])
            return Trajectory([Pose(params.t_start, quat_from_yaw(yaw), start)])
        end = start + direction * params.length_m
        return _polyline_trajectory(
            np.stack([start, end]), params.speed_mps, params.rate_hz, params.t_start
        )
    if params.kind == "arc":
        # counter-clockwise arc starting at `start`, initial heading +x
        center = start + np.array([0.0, params.radius_m, 0.0])
        total = abs(params.arc_angle_rad) * params.radius_m
        n = int(round(total / params.speed_mps * params.rate_hz)) + 1
        sign = math.copysign(1.0, params.arc_angle_rad)
        poses = []
        for i in range(n):
            s = min(i * params.speed_mps / params.rate_hz, total)
            ang = sign * s / params.radius_m
            offset = np.array([math.sin(ang), -math.cos(ang), 0.0]) * params.radius_m
            poses.append(
                Pose(
                    timestamp=params.t_start + i / params.rate_hz,
                    rotation=quat_from_yaw(ang),
                    translation=center + offset,
                )
            )
        return Trajectory(poses)
    # lawnmower: parallel legs along +x/-x joined by +y crossovers
    waypoints = [start.copy()]
    pos = start.copy()
    for leg in range(params.num_legs):
        step = np.array([params.leg_length_m if leg % 2 == 0 else -params.leg_length_m, 0.0, 0.0])
        pos = pos + step
        waypoints.append(pos.copy())
        if leg < params.num_legs - 1:
            pos = pos + np.array([0.0, params.leg_spacing_m, 0.0])
            waypoints.append(pos.copy())
    return _polyline_trajectory(
        np.array(waypoints), params.speed_mps, params.rate_hz, params.t_start
    )
