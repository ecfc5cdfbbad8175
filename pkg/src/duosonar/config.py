"""Pipeline configuration: one JSON file wiring every stage.

Top-level sections: "sonar", "preprocess", "detect" (with "horizontal",
"vertical", "dbscan"), "leading_edge", "extrinsics", "keyframes", "mount",
"simulate", "io", plus scalar "seed" and "frame_pairing_window_s". Every
section is optional and falls back to the built-in defaults, which match
the devices the pipeline was designed around.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .detect import CfarConfig, DbscanConfig, horizontal_cfar_defaults, vertical_cfar_defaults
from .geometry import RigidTransform, SonarExtrinsics
from .leading_edge import DEFAULT_TAU_HORIZONTAL, DEFAULT_TAU_VERTICAL
from .mapping import KeyframeThresholds
from .preprocess import PreprocessConfig
from .simulate import AxisAlignedBox, NoiseModel, PlanarPatch, Scene, TrajectoryParams
from .sonar import SonarIntrinsics, horizontal_sonar_intrinsics, vertical_sonar_intrinsics


class ConfigError(ValueError):
    """Raised on malformed or inconsistent pipeline configuration."""


@dataclass(frozen=True)
class SimulateConfig:
    scene: Scene = field(default_factory=Scene)
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    noise: Optional[NoiseModel] = None
    lidar_azimuth_steps: int = 64
    lidar_elevation_deg: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0)
    lidar_max_range: float = 100.0


@dataclass(frozen=True)
class IoConfig:
    frames_dir: Optional[str] = None
    trajectory_csv: Optional[str] = None
    map_ply: str = "map.ply"
    metrics_json: str = "metrics.json"
    manifest_json: str = "manifest.json"

    def output_paths(self) -> list[str]:
        return [self.map_ply, self.metrics_json, self.manifest_json]


@dataclass(frozen=True)
class PipelineConfig:
    h_intrinsics: SonarIntrinsics
    v_intrinsics: SonarIntrinsics
    h_preprocess: PreprocessConfig
    v_preprocess: PreprocessConfig
    h_tau: float
    v_tau: float
    h_cfar: CfarConfig
    v_cfar: CfarConfig
    dbscan: DbscanConfig
    extrinsics: SonarExtrinsics
    keyframes: KeyframeThresholds
    h_sonar_to_body: RigidTransform
    lidar_to_body: RigidTransform
    simulate: SimulateConfig
    io: IoConfig
    seed: int = 0
    frame_pairing_window_s: float = 0.075
    config_sha256: str = ""

    def __post_init__(self) -> None:
        outputs = self.io.output_paths()
        if len(set(outputs)) != len(outputs):
            raise ConfigError("output paths must be distinct")
        if self.frame_pairing_window_s <= 0:
            raise ConfigError("frame_pairing_window_s must be positive")


def default_config() -> PipelineConfig:
    return PipelineConfig(
        h_intrinsics=horizontal_sonar_intrinsics(),
        v_intrinsics=vertical_sonar_intrinsics(),
        h_preprocess=PreprocessConfig(chain="horizontal"),
        v_preprocess=PreprocessConfig(chain="vertical"),
        h_tau=DEFAULT_TAU_HORIZONTAL,
        v_tau=DEFAULT_TAU_VERTICAL,
        h_cfar=horizontal_cfar_defaults(),
        v_cfar=vertical_cfar_defaults(),
        dbscan=DbscanConfig(),
        extrinsics=SonarExtrinsics.default(),
        keyframes=KeyframeThresholds(),
        h_sonar_to_body=RigidTransform.identity(),
        lidar_to_body=RigidTransform.identity(),
        simulate=SimulateConfig(),
        io=IoConfig(),
    )


def _parse_intrinsics(d: dict[str, Any], fallback: SonarIntrinsics) -> SonarIntrinsics:
    try:
        return SonarIntrinsics(
            num_beams=int(d.get("num_beams", fallback.num_beams)),
            num_range_bins=int(d.get("num_range_bins", fallback.num_range_bins)),
            max_range=float(d.get("max_range_m", fallback.max_range)),
            bearing_min=math.radians(float(d["bearing_min_deg"])) if "bearing_min_deg" in d else fallback.bearing_min,
            bearing_max=math.radians(float(d["bearing_max_deg"])) if "bearing_max_deg" in d else fallback.bearing_max,
            vertical_aperture=math.radians(float(d["vertical_aperture_deg"])) if "vertical_aperture_deg" in d else fallback.vertical_aperture,
            bit_depth=int(d.get("bit_depth", fallback.bit_depth)),
            blanking=float(d.get("blanking_m", fallback.blanking)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad intrinsics: {exc}") from exc


def _parse_rigid(d: dict[str, Any]) -> RigidTransform:
    try:
        return RigidTransform.from_axis_angle(
            d.get("rotation_axis", [0.0, 0.0, 1.0]),
            float(d.get("rotation_deg", 0.0)),
            d.get("translation_m", [0.0, 0.0, 0.0]),
        )
    except ValueError as exc:
        raise ConfigError(f"bad rigid transform: {exc}") from exc


def _parse_preprocess(d: dict[str, Any], chain: str) -> PreprocessConfig:
    base = PreprocessConfig(chain=chain)
    mask = d.get("center_mask_deg")
    try:
        return PreprocessConfig(
            chain=chain,
            row_quantile=float(d.get("row_quantile", base.row_quantile)),
            center_mask_bearings=(
                (math.radians(float(mask[0])), math.radians(float(mask[1])))
                if mask
                else base.center_mask_bearings
            ),
            center_mask_threshold=float(d.get("center_mask_threshold", base.center_mask_threshold)),
            open_kernel=tuple(d.get("open_kernel", base.open_kernel)),
            median_kernel=tuple(d.get("median_kernel", base.median_kernel)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad preprocess config: {exc}") from exc


def _parse_cfar(d: dict[str, Any], fallback: CfarConfig) -> CfarConfig:
    try:
        return CfarConfig(
            reference_cells=int(d.get("reference_cells", fallback.reference_cells)),
            guard_cells=int(d.get("guard_cells", fallback.guard_cells)),
            pfa=float(d.get("pfa", fallback.pfa)),
            min_intensity=float(d.get("min_intensity", fallback.min_intensity)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad CFAR config: {exc}") from exc


def _parse_scene(d: dict[str, Any]) -> Scene:
    surfaces = []
    for i, s in enumerate(d.get("surfaces", [])):
        kind = s.get("type", "plane")
        try:
            if kind == "plane":
                surfaces.append(
                    PlanarPatch(
                        origin=s["origin"],
                        edge_u=s["edge_u"],
                        edge_v=s["edge_v"],
                        reflectivity=float(s.get("reflectivity", 1.0)),
                    )
                )
            elif kind == "box":
                surfaces.append(
                    AxisAlignedBox(
                        min_corner=s["min"],
                        max_corner=s["max"],
                        reflectivity=float(s.get("reflectivity", 1.0)),
                    )
                )
            else:
                raise ConfigError(f"surface {i}: unknown type {kind!r}")
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"surface {i}: {exc}") from exc
    return Scene(surfaces=tuple(surfaces), water_level=float(d.get("water_level_z", 0.0)))


def _parse_trajectory(d: dict[str, Any]) -> TrajectoryParams:
    base = TrajectoryParams()
    try:
        return TrajectoryParams(
            kind=d.get("kind", base.kind),
            start=tuple(d.get("start", base.start)),
            direction=tuple(d.get("direction", base.direction)),
            length_m=float(d.get("length_m", base.length_m)),
            speed_mps=float(d.get("speed_mps", base.speed_mps)),
            rate_hz=float(d.get("rate_hz", base.rate_hz)),
            t_start=float(d.get("t_start", base.t_start)),
            radius_m=float(d.get("radius_m", base.radius_m)),
            arc_angle_rad=math.radians(float(d["arc_angle_deg"])) if "arc_angle_deg" in d else base.arc_angle_rad,
            leg_length_m=float(d.get("leg_length_m", base.leg_length_m)),
            leg_spacing_m=float(d.get("leg_spacing_m", base.leg_spacing_m)),
            num_legs=int(d.get("num_legs", base.num_legs)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad trajectory params: {exc}") from exc


def _parse_noise(d: dict[str, Any]) -> NoiseModel:
    try:
        return NoiseModel(
            speckle_density=float(d.get("speckle_density", 0.0)),
            speckle_intensity=tuple(d.get("speckle_intensity", (100.0, 255.0))),
            row_bias_amplitude=float(d.get("row_bias_amplitude", 0.0)),
            seed=int(d.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(f"bad noise model: {exc}") from exc


def parse_config(raw: dict[str, Any], sha256: str = "") -> PipelineConfig:
    """Build a validated PipelineConfig from a parsed JSON document."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    base = default_config()
    sonar = raw.get("sonar", {})
    pre = raw.get("preprocess", {})
    det = raw.get("detect", {})
    le = raw.get("leading_edge", {})
    mount = raw.get("mount", {})
    sim = raw.get("simulate", {})
    io_section = raw.get("io", {})
    try:
        dbscan = DbscanConfig(
            epsilon=float(det.get("dbscan", {}).get("epsilon", 0.20)),
            min_samples=int(det.get("dbscan", {}).get("min_samples", 20)),
        )
        keyframes = KeyframeThresholds(
            translation_m=float(raw.get("keyframes", {}).get("translation_m", 1.0)),
            rotation_rad=float(raw.get("keyframes", {}).get("rotation_rad", 0.05)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    simulate = SimulateConfig(
        scene=_parse_scene(sim.get("scene", {})),
        trajectory=_parse_trajectory(sim.get("trajectory", {})),
        noise=_parse_noise(sim["noise"]) if "noise" in sim else None,
        lidar_azimuth_steps=int(sim.get("lidar", {}).get("azimuth_steps", 64)),
        lidar_elevation_deg=tuple(sim.get("lidar", {}).get("elevation_deg", (0.0, 10.0, 20.0, 30.0))),
        lidar_max_range=float(sim.get("lidar", {}).get("max_range_m", 100.0)),
    )
    io_cfg = IoConfig(
        frames_dir=io_section.get("frames_dir"),
        trajectory_csv=io_section.get("trajectory_csv"),
        map_ply=io_section.get("map_ply", "map.ply"),
        metrics_json=io_section.get("metrics_json", "metrics.json"),
        manifest_json=io_section.get("manifest_json", "manifest.json"),
    )
    ext = raw.get("extrinsics")
    return PipelineConfig(
        h_intrinsics=_parse_intrinsics(sonar.get("horizontal", {}), base.h_intrinsics),
        v_intrinsics=_parse_intrinsics(sonar.get("vertical", {}), base.v_intrinsics),
        h_preprocess=_parse_preprocess(pre.get("horizontal", {}), "horizontal"),
        v_preprocess=_parse_preprocess(pre.get("vertical", {}), "vertical"),
        h_tau=float(le.get("horizontal_tau", DEFAULT_TAU_HORIZONTAL)),
        v_tau=float(le.get("vertical_tau", DEFAULT_TAU_VERTICAL)),
        h_cfar=_parse_cfar(det.get("horizontal", {}), base.h_cfar),
        v_cfar=_parse_cfar(det.get("vertical", {}), base.v_cfar),
        dbscan=dbscan,
        extrinsics=SonarExtrinsics(_parse_rigid(ext)) if ext else SonarExtrinsics.default(),
        keyframes=keyframes,
        h_sonar_to_body=_parse_rigid(mount.get("horizontal_sonar_to_body", {})),
        lidar_to_body=_parse_rigid(mount.get("lidar_to_body", {})),
        simulate=simulate,
        io=io_cfg,
        seed=int(raw.get("seed", 0)),
        frame_pairing_window_s=float(raw.get("frame_pairing_window_s", 0.075)),
        config_sha256=sha256,
    )


def load_config(path: Path | str) -> PipelineConfig:
    """Read, hash, and validate a pipeline config file."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(raw, sha256=hashlib.sha256(blob).hexdigest())
