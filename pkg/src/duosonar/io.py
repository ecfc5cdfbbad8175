"""File formats: PGM sonar frames, binary PLY maps, XYZ text, trajectory CSV.

Sonar frames are stored as binary portable graymaps (8-bit, or 16-bit
big-endian per the Netpbm convention) with a JSON sidecar carrying the
intrinsics and timestamp. Maps are binary little-endian PLY with a
per-vertex channel byte. All writers go through a temp file plus atomic
rename so failures never leave partial outputs behind.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .mapping import CHANNEL_NAMES, Pose, Trajectory
from .sonar import PolarSonarImage, SonarIntrinsics

PLY_VERTEX_DTYPE = np.dtype([("x", "<f4"), ("y", "<f4"), ("z", "<f4"), ("channel", "u1")])


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# PGM frames + JSON sidecar


def sidecar_path(pgm_path: Path | str) -> Path:
    return Path(pgm_path).with_suffix(".json")


def write_pgm(img: PolarSonarImage, path: Path | str) -> None:
    """Write the frame grid as binary PGM and its metadata sidecar."""
    path = Path(path)
    intr = img.intrinsics
    maxval = int(intr.max_intensity)
    header = f"P5\n{intr.num_beams} {intr.num_range_bins}\n{maxval}\n".encode("ascii")
    quantized = np.floor(img.data + 0.5).astype(np.uint16 if maxval > 255 else np.uint8)
    if maxval > 255:
        body = quantized.astype(">u2").tobytes()
    else:
        body = quantized.tobytes()
    _atomic_write(path, header + body)
    meta = {
        "num_beams": intr.num_beams,
        "num_range_bins": intr.num_range_bins,
        "max_range_m": intr.max_range,
        "bearing_min_deg": math.degrees(intr.bearing_min),
        "bearing_max_deg": math.degrees(intr.bearing_max),
        "vertical_aperture_deg": math.degrees(intr.vertical_aperture),
        "blanking_m": intr.blanking,
        "timestamp_s": img.timestamp,
    }
    _atomic_write(sidecar_path(path), (json.dumps(meta, indent=2) + "\n").encode("ascii"))


def read_pgm(path: Path | str) -> PolarSonarImage:
    """Read a binary PGM frame and its JSON sidecar back into a frame."""
    path = Path(path)
    raw = path.read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    pos += 1  # single whitespace after maxval
    if maxval > 255:
        data = np.frombuffer(raw, dtype=">u2", count=width * height, offset=pos).astype(np.float64)
        bit_depth = 16
    else:
        data = np.frombuffer(raw, dtype=np.uint8, count=width * height, offset=pos).astype(np.float64)
        bit_depth = 8
    meta = json.loads(sidecar_path(path).read_text())
    intr = SonarIntrinsics(
        num_beams=meta["num_beams"],
        num_range_bins=meta["num_range_bins"],
        max_range=meta["max_range_m"],
        bearing_min=math.radians(meta["bearing_min_deg"]),
        bearing_max=math.radians(meta["bearing_max_deg"]),
        vertical_aperture=math.radians(meta["vertical_aperture_deg"]),
        bit_depth=bit_depth,
        blanking=meta.get("blanking_m", 0.0),
    )
    if (height, width) != (intr.num_range_bins, intr.num_beams):
        raise ValueError(f"{path}: PGM size {height}x{width} disagrees with sidecar")
    return PolarSonarImage(
        intrinsics=intr,
        data=data.reshape(height, width),
        timestamp=meta.get("timestamp_s", 0.0),
    )


# ---------------------------------------------------------------------------
# PLY point clouds


def write_ply(path: Path | str, xyz: np.ndarray, channels: np.ndarray) -> None:
    """Binary little-endian PLY with float32 xyz and a uchar channel."""
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    channels = np.asarray(channels, dtype=np.uint8).reshape(-1)
    if xyz.shape[0] != channels.shape[0]:
        raise ValueError("one channel per vertex required")
    legend = " ".join(f"{code}={name}" for code, name in sorted(CHANNEL_NAMES.items()))
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"comment channel codes: {legend}\n"
        f"element vertex {xyz.shape[0]}\n"
        "property float x\n"
        "property float y\n"
        "property float z\n"
        "property uchar channel\n"
        "end_header\n"
    ).encode("ascii")
    rec = np.empty(xyz.shape[0], dtype=PLY_VERTEX_DTYPE)
    rec["x"], rec["y"], rec["z"] = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    rec["channel"] = channels
    _atomic_write(Path(path), header + rec.tobytes())


def read_ply(path: Path | str) -> tuple[np.ndarray, np.ndarray]:
    """Read xyz and channel arrays from a binary little-endian PLY.

    Accepts float or double coordinates; vertices without a channel
    property get channel 0.
    """
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise ValueError(f"{path}: not a PLY file")
    header = raw[:end].decode("ascii").splitlines()
    body = raw[end + len(b"end_header\n") :]
    if "format binary_little_endian 1.0" not in header:
        raise ValueError(f"{path}: only binary little-endian PLY is supported")
    count = 0
    fields: list[tuple[str, str]] = []
    in_vertex = False
    for line in header:
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            count = int(parts[2])
            in_vertex = True
        elif parts and parts[0] == "element":
            in_vertex = False
        elif in_vertex and parts and parts[0] == "property":
            fields.append((parts[2], parts[1]))
    type_map = {"float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8", "uchar": "u1", "uint8": "u1"}
    try:
        dtype = np.dtype([(name, type_map[t]) for name, t in fields])
    except KeyError as exc:
        raise ValueError(f"{path}: unsupported property type {exc}") from exc
    rec = np.frombuffer(body, dtype=dtype, count=count)
    xyz = np.stack([rec["x"], rec["y"], rec["z"]], axis=1).astype(np.float64)
    names = [name for name, _ in fields]
    channels = rec["channel"].astype(np.uint8) if "channel" in names else np.zeros(count, dtype=np.uint8)
    return xyz, channels


# ---------------------------------------------------------------------------
# XYZ text


def write_xyz(
    path: Path | str,
    xyz: np.ndarray,
    intensities: np.ndarray | None = None,
    channel: str | None = None,
    provenance: Sequence[tuple[int, int]] | None = None,
) -> None:
    """Plain-text XYZ rows, optional intensity column and provenance comments."""
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    lines = []
    if channel is not None:
        lines.append(f"# channel: {channel}")
    lines.append("# columns: x y z" + (" intensity" if intensities is not None else ""))
    for i, p in enumerate(xyz):
        row = f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f}"
        if intensities is not None:
            row += f" {intensities[i]:.3f}"
        if provenance is not None:
            row += f" # h={provenance[i][0]} v={provenance[i][1]}"
        lines.append(row)
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("ascii"))


def read_xyz(path: Path | str) -> np.ndarray:
    """(N, 3) coordinates from an XYZ text file, ignoring comments."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        rows.append([float(parts[0]), float(parts[1]), float(parts[2])])
    return np.array(rows).reshape(-1, 3)


# ---------------------------------------------------------------------------
# Trajectory CSV


def write_trajectory_csv(path: Path | str, trajectory: Trajectory) -> None:
    """CSV rows (t, x, y, z, qx, qy, qz, qw)."""
    lines = ["t,x,y,z,qx,qy,qz,qw"]
    for p in trajectory.poses:
        x, y, z = p.translation
        qx, qy, qz, qw = p.rotation
        lines.append(f"{p.timestamp:.9f},{x:.9f},{y:.9f},{z:.9f},{qx:.12f},{qy:.12f},{qz:.12f},{qw:.12f}")
    _atomic_write(Path(path), ("\n".join(lines) + "\n").encode("ascii"))


def read_trajectory_csv(path: Path | str) -> Trajectory:
    """Parse a (t, x, y, z, qx, qy, qz, qw) CSV; quaternions are renormalized."""
    poses = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() in ("t", ""):
                continue
            vals = [float(v) for v in row]
            if len(vals) != 8:
                raise ValueError(f"{path}: trajectory rows need 8 fields, got {len(vals)}")
            q = np.array(vals[4:8])
            norm = np.linalg.norm(q)
            if norm == 0:
                raise ValueError(f"{path}: zero quaternion at t={vals[0]}")
            poses.append(Pose(timestamp=vals[0], rotation=q / norm, translation=np.array(vals[1:4])))
    if not poses:
        raise ValueError(f"{path}: no poses found")
    return Trajectory(poses)
