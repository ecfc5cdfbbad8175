#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the numpy fallback.

Times each hot kernel on frame-sized inputs and the full frame-pair
pipeline under both backends. Run from the repository root:

    python bench/benchmark.py [--repeats N]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from duosonar.kernels import pure

native = None
if not os.environ.get("DUOSONAR_FORCE_PURE"):
    try:
        import importlib

        native = importlib.import_module("duosonar.kernels._native")
    except ImportError:
        native = None


def timeit(fn, *args, repeats: int = 5) -> float:
    fn(*args)  # warm-up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_kernels(repeats: int) -> None:
    rng = np.random.default_rng(0)
    frame = rng.integers(0, 256, size=(512, 512)).astype(float)
    pts = rng.normal(scale=0.5, size=(800, 3))
    cost = rng.normal(size=(300, 450))
    alpha = 16 * (0.2 ** (-1 / 16) - 1)

    cases = [
        ("median 3x3 (512x512)", lambda k: k.median_filter2d(frame, 3, 3)),
        ("open 3x1 (512x512)", lambda k: k.grayscale_open2d(frame, 3, 1)),
        ("soca_cfar 16/8 (512x512)", lambda k: k.soca_cfar_mask(frame, 16, 8, alpha, 100.0)),
        ("leading_edge (512x512)", lambda k: k.leading_edge_bins(frame, 80.0)),
        ("dbscan 800 pts", lambda k: k.dbscan_labels(pts, 0.2, 20)),
        ("assignment 300x450", lambda k: k.solve_assignment(cost)),
    ]
    print(f"{'kernel':<28} {'pure':>10} {'native':>10} {'speedup':>9}")
    for name, call in cases:
        t_pure = timeit(call, pure, repeats=repeats)
        if native is not None:
            t_native = timeit(call, native, repeats=repeats)
            print(f"{name:<28} {t_pure * 1e3:>8.2f}ms {t_native * 1e3:>8.2f}ms {t_pure / t_native:>8.1f}x")
        else:
            print(f"{name:<28} {t_pure * 1e3:>8.2f}ms {'n/a':>10} {'':>9}")


def bench_pipeline(repeats: int) -> None:
    from duosonar.config import parse_config
    from duosonar.pipeline import process_frame_pair, simulate_dataset

    raw = {
        "sonar": {"horizontal": {"num_range_bins": 512}, "vertical": {"num_range_bins": 512}},
        "mount": {"horizontal_sonar_to_body": {"rotation_axis": [0, 0, 1], "rotation_deg": 90.0}},
        "simulate": {
            "scene": {
                "surfaces": [
                    {"type": "plane", "origin": [-5, 2.5, -4], "edge_u": [20, 0, 0],
                     "edge_v": [0, 0, 6], "reflectivity": 0.8}
                ]
            },
            "trajectory": {"kind": "line", "length_m": 3.0, "speed_mps": 1.0, "rate_hz": 2.0},
        },
    }
    cfg = parse_config(raw)
    h_frames, v_frames, _, _ = simulate_dataset(cfg)
    process_frame_pair(h_frames[0], v_frames[0], cfg)  # warm-up
    t0 = time.perf_counter()
    n = 0
    for _ in range(repeats):
        for h, v in zip(h_frames, v_frames):
            process_frame_pair(h, v, cfg)
            n += 1
    elapsed = time.perf_counter() - t0
    backend = "native" if native is not None else "pure"
    print(f"\nfull frame-pair pipeline [{backend}]: {n / elapsed:.2f} pairs/s "
          f"({elapsed / n * 1e3:.1f} ms/pair, 512-bin frames)")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--pipeline-both", action="store_true",
                        help="also rerun the pipeline benchmark in a forced-pure subprocess")
    args = parser.parse_args()
    if os.environ.get("DUOSONAR_FORCE_PURE"):
        print("(DUOSONAR_FORCE_PURE set: native column unavailable)\n")
    bench_kernels(args.repeats)
    bench_pipeline(args.repeats)
    if args.pipeline_both and native is not None:
        print()
        sys.stdout.flush()
        env = dict(os.environ, DUOSONAR_FORCE_PURE="1")
        subprocess.run(
            [sys.executable, __file__, "--repeats", str(args.repeats)],
            env=env,
            check=False,
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
