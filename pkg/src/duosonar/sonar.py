"""Polar sonar image representation and planar polar/Cartesian projection.

A multibeam forward-looking sonar frame is stored as a rectangular
beam-range intensity grid: rows are range bins, columns are bearings.
Bearings form a uniform linear grid across the field of view, and range
bins are indexed from the blanking distance (default 0) outward, with the
bin center at ``(i + 0.5) * range_resolution``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

VALID_BIT_DEPTHS = (8, 16)


@dataclass(frozen=True)
class SonarIntrinsics:
    """Geometry and quantization of one multibeam sonar.

    Bearings are radians, ranges are meters. ``bearing_min``/``bearing_max``
    are the bearings of the first and last beam column; columns in between
    are spaced uniformly.
    """

    num_beams: int
    num_range_bins: int
    max_range: float
    bearing_min: float
    bearing_max: float
    vertical_aperture: float
    bit_depth: int = 8
    blanking: float = 0.0

    def __post_init__(self) -> None:
        if self.num_beams < 2:
            raise ValueError(f"num_beams must be >= 2, got {self.num_beams}")
        if self.num_range_bins < 1:
            raise ValueError(f"num_range_bins must be >= 1, got {self.num_range_bins}")
        if not self.max_range > 0:
            raise ValueError(f"max_range must be > 0, got {self.max_range}")
        if not self.bearing_min < self.bearing_max:
            raise ValueError("bearing_min must be < bearing_max")
        if self.bearing_min < -math.pi or self.bearing_max > math.pi:
            raise ValueError("bearings must lie within [-pi, pi]")
        if not self.vertical_aperture > 0:
            raise ValueError("vertical_aperture must be > 0")
        if self.bit_depth not in VALID_BIT_DEPTHS:
            raise ValueError(f"bit_depth must be one of {VALID_BIT_DEPTHS}")
        if self.blanking < 0 or self.blanking >= self.max_range:
            raise ValueError("blanking must satisfy 0 <= blanking < max_range")

    @property
    def range_resolution(self) -> float:
        """Meters per range bin."""
        return (self.max_range - self.blanking) / self.num_range_bins

    @property
    def bearing_step(self) -> float:
        return (self.bearing_max - self.bearing_min) / (self.num_beams - 1)

    @property
    def max_intensity(self) -> float:
        return float(2**self.bit_depth - 1)

    def bearings(self) -> np.ndarray:
        """Bearing of every beam column, shape (num_beams,)."""
        return np.linspace(self.bearing_min, self.bearing_max, self.num_beams)

    def range_of_bin(self, bin_index: int | np.ndarray) -> float | np.ndarray:
        """Range at the center of a bin (bins count outward from blanking)."""
        r = self.blanking + (np.asarray(bin_index) + 0.5) * self.range_resolution
        return float(r) if np.isscalar(bin_index) or np.ndim(bin_index) == 0 else r


def bearing_of_column(intrinsics: SonarIntrinsics, column: int) -> float:
    """Bearing of beam column ``column`` under the linear column->bearing map."""
    if not 0 <= column < intrinsics.num_beams:
        raise IndexError(
            f"column {column} out of range [0, {intrinsics.num_beams})"
        )
    if column == 0:
        return intrinsics.bearing_min
    if column == intrinsics.num_beams - 1:
        return intrinsics.bearing_max
    return intrinsics.bearing_min + column * intrinsics.bearing_step


@dataclass(frozen=True)
class PolarSonarImage:
    """One beam-range intensity frame with its intrinsics and timestamp."""

    intrinsics: SonarIntrinsics
    data: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        expected = (self.intrinsics.num_range_bins, self.intrinsics.num_beams)
        if arr.shape != expected:
            raise ValueError(f"data shape {arr.shape} != intrinsics shape {expected}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("intensities must be finite")
        if arr.size and (arr.min() < 0 or arr.max() > self.intrinsics.max_intensity):
            raise ValueError(
                f"intensities must lie in [0, {self.intrinsics.max_intensity}]"
            )
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def with_data(self, data: np.ndarray, *, bit_depth: Optional[int] = None) -> "PolarSonarImage":
        """New frame sharing intrinsics/timestamp but holding ``data``."""
        intr = self.intrinsics
        if bit_depth is not None and bit_depth != intr.bit_depth:
            intr = replace(intr, bit_depth=bit_depth)
        return PolarSonarImage(intrinsics=intr, data=data, timestamp=self.timestamp)


@dataclass(frozen=True)
class CartesianPoint:
    """A 3-D point with the intensity it was extracted at."""

    x: float
    y: float
    z: float
    intensity: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError("coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def project_planar(range_m: float, bearing_rad: float, intensity: float = 0.0) -> CartesianPoint:
    """Project a polar (range, bearing) sample onto the sonar's zero-elevation plane.

    Returns ``(R cos(theta), R sin(theta), 0)``; the Euclidean norm of the
    result equals the input range.
    """
    if range_m < 0:
        raise ValueError(f"range must be >= 0, got {range_m}")
    return CartesianPoint(
        x=range_m * math.cos(bearing_rad),
        y=range_m * math.sin(bearing_rad),
        z=0.0,
        intensity=intensity,
    )


def project_planar_array(ranges: np.ndarray, bearings: np.ndarray) -> np.ndarray:
    """Vectorized planar projection, returns (N, 3) xyz with z = 0."""
    ranges = np.asarray(ranges, dtype=np.float64)
    bearings = np.asarray(bearings, dtype=np.float64)
    out = np.zeros((ranges.size, 3))
    out[:, 0] = ranges * np.cos(bearings)
    out[:, 1] = ranges * np.sin(bearings)
    return out


def polar_index_of(
    intrinsics: SonarIntrinsics, x: float, y: float
) -> Optional[tuple[int, int]]:
    """Nearest (range_bin, column) for a point in the sonar's image plane.

    Returns None when the point falls outside the observable
    [blanking, max_range] x [bearing_min, bearing_max] region.
    """
    r = math.hypot(x, y)
    if r < intrinsics.blanking or r > intrinsics.max_range:
        return None
    theta = math.atan2(y, x)
    if theta < intrinsics.bearing_min or theta > intrinsics.bearing_max:
        return None
    bin_index = int(math.floor((r - intrinsics.blanking) / intrinsics.range_resolution))
    bin_index = min(max(bin_index, 0), intrinsics.num_range_bins - 1)
    column = int(round((theta - intrinsics.bearing_min) / intrinsics.bearing_step))
    column = min(max(column, 0), intrinsics.num_beams - 1)
    return bin_index, column


def horizontal_sonar_intrinsics(num_range_bins: int = 512) -> SonarIntrinsics:
    """Horizontal sonar defaults: 130 deg FOV, 512 beams, 10 m, 20 deg aperture."""
    return SonarIntrinsics(
        num_beams=512,
        num_range_bins=num_range_bins,
        max_range=10.0,
        bearing_min=math.radians(-65.0),
        bearing_max=math.radians(65.0),
        vertical_aperture=math.radians(20.0),
        bit_depth=8,
    )


def vertical_sonar_intrinsics(num_range_bins: int = 512) -> SonarIntrinsics:
    """Vertical sonar defaults: 45 deg FOV, 256 beams, 10 m, 20 deg aperture."""
    return SonarIntrinsics(
        num_beams=256,
        num_range_bins=num_range_bins,
        max_range=10.0,
        bearing_min=math.radians(-22.5),
        bearing_max=math.radians(22.5),
        vertical_aperture=math.radians(20.0),
        bit_depth=8,
    )
