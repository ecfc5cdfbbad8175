"""Frame-pair processing and full map assembly.

Wires the per-frame stages (preprocess, leading edge, stereo fusion) and
attaches their outputs to the world-frame map at motion-interpolated
poses. Frames from the two sonars are paired by nearest timestamp within
a configurable window since the devices ping at different rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .associate import FusedPoint, StereoConfig, stereo_pipeline
from .config import PipelineConfig
from .leading_edge import LineScan, detect_leading_edge
from .mapping import (
    CHANNEL_EDGE_H,
    CHANNEL_EDGE_V,
    CHANNEL_STEREO,
    Keyframe,
    SeabedSkyMap,
    Trajectory,
    attach_lidar_scan,
    attach_sonar_data,
    select_keyframes,
)
from .preprocess import preprocess_horizontal, preprocess_vertical
from .simulate import (
    NoiseModel,
    SonarGroundTruth,
    apply_noise,
    generate_trajectory,
    lidar_ray_pattern,
    raycast_lidar,
    raycast_sonar,
)
from .sonar import PolarSonarImage


@dataclass
class FramePairResult:
    timestamp: float
    fused: list[FusedPoint]
    edge_h: LineScan
    edge_v: LineScan


@dataclass
class MapStats:
    pairs_processed: int = 0
    frames_skipped: int = 0
    unpaired_frames: int = 0
    points_rejected: int = 0
    channel_counts: dict = field(default_factory=dict)
    keyframe_count: int = 0


def process_frame_pair(
    h_raw: PolarSonarImage, v_raw: PolarSonarImage, cfg: PipelineConfig
) -> FramePairResult:
    """Preprocess one frame pair and run leading-edge plus stereo extraction."""
    h_img = preprocess_horizontal(h_raw, cfg.h_preprocess)
    v_img = preprocess_vertical(v_raw, cfg.v_preprocess)
    edge_h = detect_leading_edge(h_img, cfg.h_tau, source="horizontal")
    edge_v = detect_leading_edge(v_img, cfg.v_tau, source="vertical")
    fused = stereo_pipeline(
        h_img,
        v_img,
        cfg.extrinsics,
        StereoConfig(h_cfar=cfg.h_cfar, v_cfar=cfg.v_cfar, dbscan=cfg.dbscan),
    )
    return FramePairResult(timestamp=h_raw.timestamp, fused=fused, edge_h=edge_h, edge_v=edge_v)


def pair_frames(
    h_frames: list[PolarSonarImage], v_frames: list[PolarSonarImage], window_s: float
) -> list[tuple[PolarSonarImage, PolarSonarImage]]:
    """Greedy nearest-timestamp pairing; each frame is used at most once."""
    v_sorted = sorted(v_frames, key=lambda f: f.timestamp)
    used = [False] * len(v_sorted)
    pairs = []
    for h in sorted(h_frames, key=lambda f: f.timestamp):
        best = -1
        best_dt = window_s
        for j, v in enumerate(v_sorted):
            if used[j]:
                continue
            dt = abs(v.timestamp - h.timestamp)
            if dt <= best_dt:
                # <= keeps the later frame on exact ties, irrelevant in practice
                if dt < best_dt or best < 0:
                    best, best_dt = j, dt
            elif v.timestamp > h.timestamp + window_s:
                break
        if best >= 0:
            used[best] = True
            pairs.append((h, v_sorted[best]))
    return pairs


@dataclass
class SimulatedDataset:
    """Rendered frames, trajectory, LiDAR scans, and optional ground truth."""

    h_frames: list[PolarSonarImage]
    v_frames: list[PolarSonarImage]
    trajectory: Trajectory
    lidar_scans: list[tuple[float, np.ndarray]]
    h_truths: list[SonarGroundTruth] | None = None
    v_truths: list[SonarGroundTruth] | None = None

    def __iter__(self):
        # unpacking support for callers that only need the first four fields
        return iter((self.h_frames, self.v_frames, self.trajectory, self.lidar_scans))


def simulate_dataset(cfg: PipelineConfig, collect_truth: bool = False) -> SimulatedDataset:
    """Render the configured scene along the configured trajectory.

    One frame per sonar is rendered at every trajectory pose, plus a
    sensor-frame LiDAR scan. Hit-level ground truth (pre-noise) is kept
    only when ``collect_truth`` is set since it dominates memory on long
    runs.
    """
    sim = cfg.simulate
    trajectory = generate_trajectory(sim.trajectory)
    v_sonar_to_body = cfg.h_sonar_to_body.compose(cfg.extrinsics.vertical_to_horizontal)
    rays = lidar_ray_pattern(sim.lidar_azimuth_steps, sim.lidar_elevation_deg)

    data = SimulatedDataset(
        h_frames=[], v_frames=[], trajectory=trajectory, lidar_scans=[],
        h_truths=[] if collect_truth else None,
        v_truths=[] if collect_truth else None,
    )
    for idx, pose in enumerate(trajectory.poses):
        body_to_world = pose.as_transform()
        h_pose = body_to_world.compose(cfg.h_sonar_to_body)
        v_pose = body_to_world.compose(v_sonar_to_body)
        h_img, h_truth = raycast_sonar(sim.scene, h_pose, cfg.h_intrinsics, timestamp=pose.timestamp)
        v_img, v_truth = raycast_sonar(sim.scene, v_pose, cfg.v_intrinsics, timestamp=pose.timestamp)
        if sim.noise is not None:
            h_img = apply_noise(h_img, _frame_noise(sim.noise, cfg.seed, 2 * idx))
            v_img = apply_noise(v_img, _frame_noise(sim.noise, cfg.seed, 2 * idx + 1))
        data.h_frames.append(h_img)
        data.v_frames.append(v_img)
        if collect_truth:
            data.h_truths.append(h_truth)
            data.v_truths.append(v_truth)
        lidar_pose = body_to_world.compose(cfg.lidar_to_body)
        world_pts = raycast_lidar(sim.scene, lidar_pose, rays, sim.lidar_max_range)
        sensor_pts = lidar_pose.inverse().apply(world_pts) if world_pts.size else world_pts
        data.lidar_scans.append((pose.timestamp, sensor_pts))
    return data


def _frame_noise(model: NoiseModel, seed: int, index: int) -> NoiseModel:
    return replace(model, seed=model.seed + 1000003 * seed + index)


def build_map(
    cfg: PipelineConfig,
    h_frames: list[PolarSonarImage],
    v_frames: list[PolarSonarImage],
    trajectory: Trajectory,
    lidar_scans: list[tuple[float, np.ndarray]] | None = None,
) -> tuple[SeabedSkyMap, MapStats]:
    """Assemble the seabed-to-sky map from frames, trajectory, and LiDAR.

    LiDAR scans are attached at keyframe poses; sonar products (fused
    stereo points and both leading-edge line scans) are attached at their
    own interpolated timestamps. Points outside the trajectory span are
    rejected and counted.
    """
    stats = MapStats()
    smap = SeabedSkyMap()
    smap.keyframes = select_keyframes(trajectory, cfg.keyframes)
    stats.keyframe_count = len(smap.keyframes)

    if lidar_scans:
        by_time = {round(t, 9): pts for t, pts in lidar_scans}
        updated = []
        for kf in smap.keyframes:
            pts = by_time.get(round(kf.pose.timestamp, 9))
            if pts is not None and len(pts):
                attach_lidar_scan(smap, cfg.lidar_to_body.apply(pts), kf.pose)
                updated.append(Keyframe(id=kf.id, pose=kf.pose, scan_ref=kf.id))
            else:
                updated.append(kf)
        smap.keyframes = updated

    pairs = pair_frames(h_frames, v_frames, cfg.frame_pairing_window_s)
    stats.unpaired_frames = len(h_frames) + len(v_frames) - 2 * len(pairs)
    v_sonar_to_body = cfg.h_sonar_to_body.compose(cfg.extrinsics.vertical_to_horizontal)

    for h_raw, v_raw in pairs:
        try:
            result = process_frame_pair(h_raw, v_raw, cfg)
        except ValueError:
            stats.frames_skipped += 1
            continue
        t = result.timestamp
        if result.fused:
            fused_xyz = np.array([p.as_array() for p in result.fused])
            _, rej = attach_sonar_data(
                smap, fused_xyz, np.full(len(result.fused), t),
                cfg.h_sonar_to_body, trajectory, CHANNEL_STEREO,
            )
            stats.points_rejected += rej
        for scan, sensor_to_body, channel in (
            (result.edge_h, cfg.h_sonar_to_body, CHANNEL_EDGE_H),
            (result.edge_v, v_sonar_to_body, CHANNEL_EDGE_V),
        ):
            if len(scan):
                _, rej = attach_sonar_data(
                    smap, scan.xyz, np.full(len(scan), t), sensor_to_body, trajectory, channel
                )
                stats.points_rejected += rej
        stats.pairs_processed += 1

    stats.channel_counts = smap.channel_counts()
    return smap, stats
