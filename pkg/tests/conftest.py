"""Shared fixtures: small sonar geometries and frame builders."""

from __future__ import annotations

import math

import numpy as np
import pytest

from duosonar.sonar import PolarSonarImage, SonarIntrinsics


@pytest.fixture
def small_intrinsics() -> SonarIntrinsics:
    """16 bins x 8 beams, 8 m range: cheap frames for unit tests."""
    return SonarIntrinsics(
        num_beams=8,
        num_range_bins=16,
        max_range=8.0,
        bearing_min=math.radians(-30.0),
        bearing_max=math.radians(30.0),
        vertical_aperture=math.radians(20.0),
    )


@pytest.fixture
def cfar_intrinsics() -> SonarIntrinsics:
    """64 bins x 8 beams: the CFAR oracle-equivalence frame size."""
    return SonarIntrinsics(
        num_beams=8,
        num_range_bins=64,
        max_range=10.0,
        bearing_min=math.radians(-30.0),
        bearing_max=math.radians(30.0),
        vertical_aperture=math.radians(20.0),
    )


def make_image(intrinsics: SonarIntrinsics, data=None, timestamp: float = 0.0) -> PolarSonarImage:
    if data is None:
        data = np.zeros((intrinsics.num_range_bins, intrinsics.num_beams))
    return PolarSonarImage(intrinsics=intrinsics, data=np.asarray(data, dtype=float), timestamp=timestamp)
