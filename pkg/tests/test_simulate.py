"""Tests for the synthetic scene, raycasting, noise, and trajectories."""

from __future__ import annotations

import math

import numpy as np
import pytest

from duosonar.geometry import RigidTransform
from duosonar.simulate import (
    AxisAlignedBox,
    NoiseModel,
    PlanarPatch,
    Scene,
    TrajectoryParams,
    apply_noise,
    generate_trajectory,
    lidar_ray_pattern,
    raycast_lidar,
    raycast_sonar,
)
from duosonar.sonar import horizontal_sonar_intrinsics

from conftest import make_image


def wall_scene(x: float = 5.0, half: float = 5.0, reflectivity: float = 0.8) -> Scene:
    wall = PlanarPatch(
        origin=(x, -half, -half),
        edge_u=(0.0, 2 * half, 0.0),
        edge_v=(0.0, 0.0, 2 * half),
        reflectivity=reflectivity,
    )
    return Scene(surfaces=(wall,), water_level=0.0)


class TestRaycastSonar:
    def test_empty_scene_all_zero(self) -> None:
        img, truth = raycast_sonar(Scene(), RigidTransform.identity(), horizontal_sonar_intrinsics())
        assert not img.data.any()
        assert len(truth) == 0

    def test_perpendicular_wall_bright_at_range(self) -> None:
        intr = horizontal_sonar_intrinsics()
        img, truth = raycast_sonar(wall_scene(x=5.0), RigidTransform.identity(), intr)
        assert img.data.any()
        boresight_col = intr.num_beams // 2
        col = img.data[:, boresight_col]
        lit = np.nonzero(col)[0]
        assert lit.size > 0
        r0 = intr.range_of_bin(int(lit.min()))
        assert r0 == pytest.approx(5.0, abs=intr.range_resolution)
        assert col[lit].max() == pytest.approx(0.8 * 255.0)

    def test_wall_behind_sensor_invisible(self) -> None:
        img, truth = raycast_sonar(
            wall_scene(x=-5.0), RigidTransform.identity(), horizontal_sonar_intrinsics()
        )
        assert not img.data.any()
        assert len(truth) == 0

    def test_hits_satisfy_plane_equation(self) -> None:
        scene = wall_scene(x=4.0)
        wall = scene.surfaces[0]
        img, truth = raycast_sonar(scene, RigidTransform.identity(), horizontal_sonar_intrinsics())
        n = wall.normal
        d = np.abs((truth.points_world - wall.origin) @ n)
        assert d.max() < 1e-9

    def test_every_nonzero_cell_backed_by_ground_truth(self) -> None:
        intr = horizontal_sonar_intrinsics(num_range_bins=128)
        img, truth = raycast_sonar(wall_scene(x=3.0), RigidTransform.identity(), intr)
        lit = {(int(r), int(c)) for r, c in np.argwhere(img.data > 0)}
        assert lit == truth.cells()
        # every recorded (range, bearing) quantizes to its recorded cell
        for b, c, p in zip(truth.bins[:200], truth.columns[:200], truth.points_sensor[:200]):
            r = np.linalg.norm(p)
            assert int((r - intr.blanking) / intr.range_resolution) == b
            theta = math.atan2(p[1], p[0])
            col = int(round((theta - intr.bearing_min) / intr.bearing_step))
            assert col == c

    def test_box_surface(self) -> None:
        scene = Scene(surfaces=(AxisAlignedBox(min_corner=(4, -2, -2), max_corner=(6, 2, 2), reflectivity=0.5),))
        img, truth = raycast_sonar(scene, RigidTransform.identity(), horizontal_sonar_intrinsics())
        assert img.data.any()
        # first hits lie on the near face x = 4
        assert truth.points_world[:, 0].min() == pytest.approx(4.0, abs=1e-9)


class TestRaycastLidar:
    def test_empty_scene(self) -> None:
        pts = raycast_lidar(Scene(), RigidTransform.identity(), lidar_ray_pattern())
        assert pts.shape == (0, 3)

    def test_wall_hits_on_plane_above_water(self) -> None:
        scene = wall_scene(x=5.0)
        pts = raycast_lidar(scene, RigidTransform.identity(), lidar_ray_pattern(128, (0.0, 15.0, 30.0)))
        assert pts.shape[0] > 0
        assert np.abs(pts[:, 0] - 5.0).max() < 1e-9
        assert np.all(pts[:, 2] > scene.water_level)

    def test_below_water_hits_discarded(self) -> None:
        # wall entirely below the waterline is invisible to the lidar
        wall = PlanarPatch(origin=(5, -5, -10), edge_u=(0, 10, 0), edge_v=(0, 0, 9.9))
        scene = Scene(surfaces=(wall,), water_level=0.0)
        down_rays = lidar_ray_pattern(64, (-5.0, -15.0))
        pts = raycast_lidar(scene, RigidTransform.identity(), down_rays)
        assert pts.shape == (0, 3)


class TestApplyNoise:
    def test_zero_density_identity(self, small_intrinsics) -> None:
        img = make_image(small_intrinsics, np.full((16, 8), 40.0))
        out = apply_noise(img, NoiseModel(speckle_density=0.0, row_bias_amplitude=0.0, seed=3))
        assert np.array_equal(out.data, img.data)

    def test_seed_reproducible(self, small_intrinsics) -> None:
        img = make_image(small_intrinsics)
        model = NoiseModel(speckle_density=0.3, row_bias_amplitude=5.0, seed=12)
        a = apply_noise(img, model)
        b = apply_noise(img, model)
        assert np.array_equal(a.data, b.data)

    def test_exact_speckle_count(self) -> None:
        intr = horizontal_sonar_intrinsics(num_range_bins=100)
        from dataclasses import replace

        intr = replace(intr, num_beams=100, bearing_min=-0.5, bearing_max=0.5)
        img = make_image(intr, np.zeros((100, 100)))
        out = apply_noise(img, NoiseModel(speckle_density=0.1, speckle_intensity=(50.0, 200.0), seed=4))
        assert int((out.data > 0).sum()) == 1000


class TestGenerateTrajectory:
    def test_line_pose_count(self) -> None:
        params = TrajectoryParams(kind="line", length_m=10.0, speed_mps=1.0, rate_hz=10.0)
        traj = generate_trajectory(params)
        assert len(traj) == 101
        assert traj.poses[0].timestamp == 0.0
        assert traj.poses[-1].timestamp == pytest.approx(10.0)
        assert np.abs(traj.poses[-1].translation - np.array([10.0, 0.0, 0.0])).max() < 1e-9

    def test_zero_length_single_pose(self) -> None:
        traj = generate_trajectory(TrajectoryParams(kind="line", length_m=0.0))
        assert len(traj) == 1

    def test_arc_quaternions_unit(self) -> None:
        traj = generate_trajectory(TrajectoryParams(kind="arc", radius_m=5.0, speed_mps=1.0, rate_hz=5.0))
        for p in traj.poses:
            assert abs(np.linalg.norm(p.rotation) - 1.0) < 1e-9

    def test_arc_constant_speed(self) -> None:
        traj = generate_trajectory(TrajectoryParams(kind="arc", radius_m=5.0, speed_mps=1.0, rate_hz=10.0))
        d = np.diff([p.translation for p in traj.poses], axis=0)
        steps = np.linalg.norm(d, axis=1)
        # chord of a 0.1 m arc step on r=5: essentially 0.1
        assert np.allclose(steps[:-1], steps[0], atol=1e-9)

    def test_lawnmower_covers_legs(self) -> None:
        params = TrajectoryParams(
            kind="lawnmower", leg_length_m=4.0, leg_spacing_m=1.0, num_legs=3, speed_mps=2.0, rate_hz=10.0
        )
        traj = generate_trajectory(params)
        xyz = np.array([p.translation for p in traj.poses])
        assert xyz[:, 0].max() == pytest.approx(4.0, abs=0.2)
        assert xyz[:, 1].max() == pytest.approx(2.0, abs=1e-9)

    def test_invalid_params_rejected(self) -> None:
        with pytest.raises(ValueError):
            TrajectoryParams(kind="spiral")
        with pytest.raises(ValueError):
            TrajectoryParams(speed_mps=0.0)
        with pytest.raises(ValueError):
            generate_trajectory(TrajectoryParams(kind="line", direction=(0, 0, 0)))
