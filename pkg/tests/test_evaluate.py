"""Tests for alignment, wall metrics, KDE, and Hellinger distance."""

from __future__ import annotations

import math

import numpy as np
import pytest

from duosonar.evaluate import (
    compare_wall_clouds,
    hellinger,
    kde_1d,
    mean_pairwise_cosine,
    rigid_align,
    silverman_bandwidth,
    wall_width,
)


def rotz(deg: float) -> np.ndarray:
    a = math.radians(deg)
    return np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]])


class TestRigidAlign:
    def test_identical_clouds(self) -> None:
        rng = np.random.default_rng(71)
        pts = rng.normal(size=(20, 3))
        res = rigid_align(pts, pts)
        assert np.abs(res.rotation - np.eye(3)).max() < 1e-9
        assert np.abs(res.translation).max() < 1e-9
        assert res.residuals.max() < 1e-9
        assert res.mean_error < 1e-9

    def test_recovers_known_transform(self) -> None:
        rng = np.random.default_rng(72)
        src = rng.normal(size=(30, 3))
        rot = rotz(90.0)
        tr = np.array([1.0, 2.0, 0.0])
        tgt = src @ rot.T + tr
        res = rigid_align(src, tgt)
        assert np.abs(res.rotation - rot).max() < 1e-9
        assert np.abs(res.translation - tr).max() < 1e-9
        assert res.residuals.max() < 1e-9

    def test_near_planar_set_is_proper_rotation(self) -> None:
        rng = np.random.default_rng(73)
        src = rng.normal(size=(40, 3))
        src[:, 2] *= 1e-12  # almost exactly planar: reflection-prone
        tgt = src @ rotz(30.0).T
        res = rigid_align(src, tgt)
        assert np.linalg.det(res.rotation) == pytest.approx(1.0, abs=1e-9)

    def test_too_few_points_rejected(self) -> None:
        with pytest.raises(ValueError):
            rigid_align(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_collinear_rejected(self) -> None:
        line = np.arange(5)[:, None] * np.array([1.0, 0.0, 0.0])
        with pytest.raises(ValueError, match="collinear"):
            rigid_align(line, line)


class TestWallWidth:
    def test_uniform_sample_trimmed_width(self) -> None:
        rng = np.random.default_rng(74)
        y = rng.uniform(0.0, 1.0, 1000)
        pts = np.stack([np.zeros_like(y), y, np.zeros_like(y)], axis=1)
        got = wall_width(pts, trim_fraction=0.05)
        s = np.sort(y)
        want = s[-51] - s[50]  # order-statistics oracle: drop 50 per side
        assert got == pytest.approx(want, abs=1e-12)
        assert got == pytest.approx(0.90, abs=0.02)

    def test_identical_y_zero_width(self) -> None:
        pts = np.tile(np.array([[1.0, 2.0, 3.0]]), (10, 1))
        assert wall_width(pts) == 0.0

    def test_trim_zero_full_range(self) -> None:
        pts = np.array([[0, 0.0, 0], [0, 4.0, 0], [0, 1.0, 0]])
        assert wall_width(pts, trim_fraction=0.0) == 4.0

    def test_empty_after_trim_rejected(self) -> None:
        # trimming < 50% per side always keeps >= 1 point, so only an empty
        # input can empty out
        assert wall_width(np.zeros((1, 3)), trim_fraction=0.49) == 0.0
        with pytest.raises(ValueError):
            wall_width(np.zeros((0, 3)), trim_fraction=0.0)
        with pytest.raises(ValueError):
            wall_width(np.zeros((5, 3)), trim_fraction=0.6)


class TestMeanPairwiseCosine:
    def test_identical_clouds_unity(self) -> None:
        rng = np.random.default_rng(75)
        pts = rng.normal(size=(50, 3)) + 5.0
        assert mean_pairwise_cosine(pts, pts) == 1.0

    def test_negated_cloud_ordered(self) -> None:
        rng = np.random.default_rng(76)
        pts = rng.normal(size=(50, 3))
        assert mean_pairwise_cosine(pts, -pts, correspondence="ordered") == pytest.approx(-1.0)

    def test_small_hand_case(self) -> None:
        a = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]])
        b = np.array([[1.0, 1.0, 0], [0, 2.0, 0], [1.0, 0.0, 0]])
        # ordered pairs: cos45, cos0, cos45
        want = (math.cos(math.pi / 4) + 1.0 + math.cos(math.pi / 4)) / 3.0
        assert mean_pairwise_cosine(a, b, correspondence="ordered") == pytest.approx(want)

    def test_empty_rejected(self) -> None:
        with pytest.raises(ValueError):
            mean_pairwise_cosine(np.zeros((0, 3)), np.ones((3, 3)))


class TestKde:
    def test_integral_is_one(self) -> None:
        rng = np.random.default_rng(77)
        for _ in range(5):
            vals = rng.normal(size=200)
            centers, dens = kde_1d(vals, bin_count=100)
            width = centers[1] - centers[0]
            assert abs(float(dens.sum() * width) - 1.0) < 1e-6
            assert np.all(dens >= 0.0)

    def test_two_points_large_bandwidth_near_uniform(self) -> None:
        centers, dens = kde_1d(np.array([0.0, 1.0]), bin_count=50, bandwidth=100.0)
        width = centers[1] - centers[0]
        assert abs(float(dens.sum() * width) - 1.0) < 1e-6
        assert dens.max() / dens.min() < 1.001

    def test_standard_normal_density_at_zero(self) -> None:
        rng = np.random.default_rng(78)
        vals = rng.standard_normal(10000)
        centers, dens = kde_1d(vals, bin_count=100)
        at_zero = dens[np.argmin(np.abs(centers))]
        assert abs(at_zero - 0.3989) / 0.3989 < 0.15

    def test_identical_values_rejected(self) -> None:
        with pytest.raises(ValueError, match="zero variance"):
            kde_1d(np.full(10, 3.0))

    def test_silverman_positive(self) -> None:
        rng = np.random.default_rng(79)
        assert silverman_bandwidth(rng.normal(size=100)) > 0


class TestHellinger:
    def test_identical_zero(self) -> None:
        centers, dens = kde_1d(np.random.default_rng(80).normal(size=100), bin_count=60)
        width = float(centers[1] - centers[0])
        assert hellinger(dens, dens, width) == pytest.approx(0.0, abs=1e-7)

    def test_disjoint_supports_one(self) -> None:
        p = np.zeros(100)
        q = np.zeros(100)
        p[:50] = 0.02 * 100 / 50  # normalized on unit bin width 0.01... use explicit
        width = 0.01
        p[:] = 0.0
        q[:] = 0.0
        p[:50] = 1.0 / (50 * width)
        q[50:] = 1.0 / (50 * width)
        assert hellinger(p, q, width) == 1.0

    def test_symmetric(self) -> None:
        rng = np.random.default_rng(81)
        _, p = kde_1d(rng.normal(size=100), bin_count=64)
        _, q = kde_1d(rng.normal(size=100) + 0.4, bin_count=64)
        assert hellinger(p, q, 0.02) == pytest.approx(hellinger(q, p, 0.02))

    def test_gaussian_pair_analytic_value(self) -> None:
        # unit-variance normals one sigma apart: H = sqrt(1 - exp(-1/8))
        grid = np.linspace(-8.0, 9.0, 4001)
        width = grid[1] - grid[0]
        p = np.exp(-0.5 * grid**2) / math.sqrt(2 * math.pi)
        q = np.exp(-0.5 * (grid - 1.0) ** 2) / math.sqrt(2 * math.pi)
        got = hellinger(p, q, width)
        analytic = math.sqrt(1.0 - math.exp(-1.0 / 8.0))
        # quadrature oracle over the same grid
        oracle = math.sqrt(1.0 - float(np.trapezoid(np.sqrt(p * q), grid)))
        assert got == pytest.approx(analytic, abs=1e-3)
        assert got == pytest.approx(oracle, abs=1e-3)

    def test_mismatched_bins_rejected(self) -> None:
        with pytest.raises(ValueError):
            hellinger(np.ones(4), np.ones(5), 0.1)


class TestCompareWallClouds:
    def test_identical_clouds(self) -> None:
        rng = np.random.default_rng(82)
        pts = rng.normal(size=(300, 3)) + np.array([10.0, 0, 0])
        cmpres = compare_wall_clouds(pts, pts.copy())
        assert cmpres.hellinger == pytest.approx(0.0, abs=1e-7)
        assert cmpres.mean_cosine == 1.0
        assert cmpres.width_difference == 0.0

    def test_report_dict_keys(self) -> None:
        rng = np.random.default_rng(83)
        a = rng.normal(size=(100, 3)) + np.array([5.0, 0, 0])
        b = rng.normal(size=(100, 3)) + np.array([5.0, 0.1, 0])
        d = compare_wall_clouds(a, b).to_dict()
        assert set(d) == {"wall_width_a", "wall_width_b", "width_diff", "mean_cosine", "hellinger", "kde"}
