"""Dual orthogonal forward-looking sonar stereo fusion and map assembly.

A horizontally and a vertically mounted multibeam sonar observe the same
volume; features matched across the two views recover the elevation lost
in each planar projection. Leading-edge line scans, fused stereo points,
and above-water LiDAR scans are assembled into one world-frame map using
keyframed, motion-interpolated poses from an external trajectory.
"""

__version__ = "0.1.0"

from .sonar import (  # noqa: F401
    CartesianPoint,
    PolarSonarImage,
    SonarIntrinsics,
    bearing_of_column,
    horizontal_sonar_intrinsics,
    polar_index_of,
    project_planar,
    vertical_sonar_intrinsics,
)
from .geometry import RigidTransform, SonarExtrinsics, trim_to_overlap  # noqa: F401
from .detect import CfarConfig, DbscanConfig, FeaturePoint, dbscan, soca_cfar  # noqa: F401
from .associate import FusedPoint, StereoConfig, fuse, match_clusters, match_features, stereo_pipeline  # noqa: F401
from .leading_edge import LineScan, detect_leading_edge  # noqa: F401
from .mapping import Keyframe, KeyframeThresholds, Pose, SeabedSkyMap, Trajectory, interpolate_pose  # noqa: F401
from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
