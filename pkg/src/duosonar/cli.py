"""Batch entry points: simulate, map, eval.

Exit codes: 0 success, 1 usage error, 2 data error. All outputs are
written atomically (temp file + rename) so a failing run leaves no
partial files behind. Run manifests carry the config hash, seed, and tool
version needed to reproduce a run exactly; nothing wall-clock-dependent
is written to the output files.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, PipelineConfig, load_config
from .evaluate import compare_wall_clouds, rigid_align
from .io import (
    _atomic_write,
    read_ply,
    read_trajectory_csv,
    read_xyz,
    write_pgm,
    write_ply,
    write_trajectory_csv,
    write_xyz,
    read_pgm,
)
from .mapping import CHANNEL_CODES, CHANNEL_NAMES
from .pipeline import build_map, simulate_dataset


class DataError(Exception):
    """Unreadable or inconsistent input data (exit code 2)."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; this tool reserves 2 for data errors
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="duosonar", description="Dual-sonar stereo fusion and mapping")
    parser.add_argument("--version", action="version", version=f"duosonar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    p_sim.add_argument("-c", "--config", required=True, help="pipeline config JSON")
    p_sim.add_argument("-o", "--out-dir", required=True, help="dataset output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override config seed")

    p_map = sub.add_parser("map", help="run the mapping pipeline")
    p_map.add_argument("-c", "--config", required=True, help="pipeline config JSON")
    p_map.add_argument("--simulate", action="store_true", help="render inputs from the configured scene instead of reading files")
    p_map.add_argument("--seed", type=int, default=None, help="override config seed")
    p_map.add_argument("-o", "--out-dir", default=".", help="directory for map/metrics/manifest outputs")

    p_eval = sub.add_parser("eval", help="compare two point clouds")
    p_eval.add_argument("--cloud-a", required=True, help="PLY or XYZ cloud A")
    p_eval.add_argument("--cloud-b", required=True, help="PLY or XYZ cloud B")
    p_eval.add_argument("--channel-a", choices=sorted(CHANNEL_CODES), help="channel filter for PLY cloud A")
    p_eval.add_argument("--channel-b", choices=sorted(CHANNEL_CODES), help="channel filter for PLY cloud B")
    p_eval.add_argument("--crop-x", nargs=2, type=float, metavar=("LO", "HI"), help="keep only points with x in [LO, HI]")
    p_eval.add_argument("--bins", type=int, default=100, help="KDE bin count")
    p_eval.add_argument("--trim", type=float, default=0.05, help="wall-width tail trim fraction per side")
    p_eval.add_argument("--bandwidth", type=float, default=None, help="KDE bandwidth override")
    p_eval.add_argument("--correspondence", choices=("nearest", "ordered"), default="nearest")
    p_eval.add_argument("--align-source", help="XYZ points picked in cloud A's frame")
    p_eval.add_argument("--align-target", help="XYZ reference points; alignment applied to cloud A")
    p_eval.add_argument("-o", "--out", default="eval_metrics.json", help="metrics JSON output")
    p_eval.add_argument("--kde-csv", default=None, help="optional CSV dump of the KDE curves")
    return parser


def _load_pipeline_config(path: str, seed_override: int | None) -> PipelineConfig:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        raise DataError(str(exc)) from exc
    if seed_override is not None:
        cfg = dataclasses.replace(cfg, seed=seed_override)
    return cfg


def run_simulate(args) -> int:
    cfg = _load_pipeline_config(args.config, args.seed)
    out = Path(args.out_dir)
    frames_dir = out / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    data = simulate_dataset(cfg, collect_truth=True)
    for i, (h, v) in enumerate(zip(data.h_frames, data.v_frames)):
        write_pgm(h, frames_dir / f"h_{i:06d}.pgm")
        write_pgm(v, frames_dir / f"v_{i:06d}.pgm")
    write_trajectory_csv(out / "trajectory.csv", data.trajectory)
    lidar_dir = out / "lidar"
    lidar_dir.mkdir(exist_ok=True)
    for i, (t, pts) in enumerate(data.lidar_scans):
        write_xyz(lidar_dir / f"scan_{i:06d}.xyz", pts, channel=f"lidar t={t:.9f}")
    truth_arrays = {}
    for side, truths in (("h", data.h_truths), ("v", data.v_truths)):
        for i, truth in enumerate(truths):
            truth_arrays[f"{side}{i}_cells"] = np.stack([truth.bins, truth.columns], axis=1).astype(np.int32)
            truth_arrays[f"{side}{i}_world"] = truth.points_world.astype(np.float32)
            truth_arrays[f"{side}{i}_surface"] = truth.surface_indices.astype(np.int32)
    np.savez_compressed(out / "groundtruth.npz", **truth_arrays)
    summary = {
        "config_sha256": cfg.config_sha256,
        "seed": cfg.seed,
        "version": __version__,
        "frame_pairs": len(data.h_frames),
        "trajectory_poses": len(data.trajectory),
        "lidar_scans": len(data.lidar_scans),
    }
    _atomic_write(out / "dataset.json", (json.dumps(summary, indent=2) + "\n").encode("ascii"))
    print(f"simulate: wrote {len(data.h_frames)} frame pairs to {out}")
    return 0


def _read_frames(frames_dir: Path, prefix: str) -> tuple[list, int]:
    frames = []
    skipped = 0
    for path in sorted(frames_dir.glob(f"{prefix}_*.pgm")):
        try:
            frames.append(read_pgm(path))
        except (ValueError, OSError, KeyError) as exc:
            print(f"warning: skipping frame {path}: {exc}", file=sys.stderr)
            skipped += 1
    if not frames and skipped:
        raise DataError(f"all {prefix} frames under {frames_dir} were unreadable")
    return frames, skipped


def run_map(args) -> int:
    cfg = _load_pipeline_config(args.config, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    unreadable_frames = 0
    if args.simulate:
        h_frames, v_frames, trajectory, lidar_scans = simulate_dataset(cfg)
    else:
        if not cfg.io.frames_dir or not cfg.io.trajectory_csv:
            raise DataError("config io.frames_dir and io.trajectory_csv are required without --simulate")
        frames_dir = Path(cfg.io.frames_dir)
        if not frames_dir.is_dir():
            raise DataError(f"frames directory {frames_dir} does not exist")
        traj_path = Path(cfg.io.trajectory_csv)
        if not traj_path.is_file():
            raise DataError(f"trajectory file {traj_path} does not exist")
        h_frames, h_bad = _read_frames(frames_dir, "h")
        v_frames, v_bad = _read_frames(frames_dir, "v")
        unreadable_frames = h_bad + v_bad
        try:
            trajectory = read_trajectory_csv(traj_path)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        lidar_scans = []
        lidar_dir = frames_dir.parent / "lidar"
        if lidar_dir.is_dir():
            for i, path in enumerate(sorted(lidar_dir.glob("scan_*.xyz"))):
                if i < len(trajectory.poses):
                    lidar_scans.append((trajectory.poses[i].timestamp, read_xyz(path)))
        if not h_frames or not v_frames:
            raise DataError(f"no frames found under {frames_dir}")

    t0 = time.perf_counter()
    smap, stats = build_map(cfg, h_frames, v_frames, trajectory, lidar_scans)
    elapsed = time.perf_counter() - t0

    xyz, channels, _ = smap.points()
    map_path = out / cfg.io.map_ply
    if map_path.suffix.lower() == ".xyz":
        # plain-text fallback for toolchains without PLY support
        names = np.array([CHANNEL_NAMES[int(c)] for c in channels])
        lines = ["# columns: x y z channel"]
        lines += [f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {n}" for p, n in zip(xyz, names)]
        _atomic_write(map_path, ("\n".join(lines) + "\n").encode("ascii"))
    else:
        write_ply(map_path, xyz, channels)
    metrics = {
        "pairs_processed": stats.pairs_processed,
        "frames_skipped": stats.frames_skipped,
        "frames_unreadable": unreadable_frames,
        "unpaired_frames": stats.unpaired_frames,
        "points_rejected": stats.points_rejected,
        "keyframes": stats.keyframe_count,
        "channel_counts": stats.channel_counts,
        "total_points": int(xyz.shape[0]),
    }
    _atomic_write(out / cfg.io.metrics_json, (json.dumps(metrics, indent=2, sort_keys=True) + "\n").encode("ascii"))
    manifest = {
        "config_sha256": cfg.config_sha256,
        "seed": cfg.seed,
        "version": __version__,
        "channel_counts": stats.channel_counts,
    }
    _atomic_write(out / cfg.io.manifest_json, (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("ascii"))
    rate = stats.pairs_processed / elapsed if elapsed > 0 else float("inf")
    print(f"map: {stats.pairs_processed} pairs, {xyz.shape[0]} points, {rate:.2f} pairs/s", file=sys.stderr)
    return 0


def _load_cloud(path_str: str, channel: str | None) -> np.ndarray:
    path = Path(path_str)
    if not path.is_file():
        raise DataError(f"cloud {path} does not exist")
    try:
        if path.suffix.lower() == ".ply":
            xyz, channels = read_ply(path)
            if channel is not None:
                xyz = xyz[channels == CHANNEL_CODES[channel]]
            return xyz
        return read_xyz(path)
    except ValueError as exc:
        raise DataError(f"cannot read cloud {path}: {exc}") from exc


def run_eval(args) -> int:
    cloud_a = _load_cloud(args.cloud_a, args.channel_a)
    cloud_b = _load_cloud(args.cloud_b, args.channel_b)
    report: dict = {}
    if (args.align_source is None) != (args.align_target is None):
        raise DataError("--align-source and --align-target must be given together")
    if args.align_source:
        src = read_xyz(args.align_source)
        dst = read_xyz(args.align_target)
        if src.shape != dst.shape:
            raise DataError("alignment source/target point counts differ")
        try:
            alignment = rigid_align(src, dst)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        cloud_a = alignment.apply(cloud_a)
        report["alignment"] = {
            "mean_error_m": alignment.mean_error,
            "ci95_half_width_m": alignment.ci95_half_width,
            "residuals_m": alignment.residuals.tolist(),
        }
    if args.crop_x:
        lo, hi = args.crop_x
        cloud_a = cloud_a[(cloud_a[:, 0] >= lo) & (cloud_a[:, 0] <= hi)]
        cloud_b = cloud_b[(cloud_b[:, 0] >= lo) & (cloud_b[:, 0] <= hi)]
    try:
        comparison = compare_wall_clouds(
            cloud_a,
            cloud_b,
            bin_count=args.bins,
            trim_fraction=args.trim,
            bandwidth=args.bandwidth,
            correspondence=args.correspondence,
        )
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    report.update(comparison.to_dict())
    _atomic_write(Path(args.out), (json.dumps(report, indent=2, sort_keys=True) + "\n").encode("ascii"))
    if args.kde_csv:
        lines = ["center,density_a,density_b"]
        for c, da, db in zip(comparison.kde_centers, comparison.kde_density_a, comparison.kde_density_b):
            lines.append(f"{c:.9f},{da:.9e},{db:.9e}")
        _atomic_write(Path(args.kde_csv), ("\n".join(lines) + "\n").encode("ascii"))
    print(
        f"eval: width_diff={comparison.width_difference:.4f} m, "
        f"cosine={comparison.mean_cosine:.4f}, hellinger={comparison.hellinger:.4f}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"simulate": run_simulate, "map": run_map, "eval": run_eval}
    try:
        return handlers[args.command](args)
    except DataError as exc:
        print(f"duosonar {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"duosonar {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
