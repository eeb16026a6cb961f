"""Line-based panoramic localization.

Recovers a 6DoF camera pose from 2D line segments on the query sphere
against a 3D line map: principal-direction rotations, grid translations,
decomposed spherical line distance fields with a robust inlier-count
loss, and PnP-RANSAC refinement from point correspondences.
"""

from .directions import (
    PrincipalDirections2D,
    PrincipalDirections3D,
    assign_lines_2d,
    assign_lines_3d,
    directions_3d,
    vanishing_points_2d,
)
from .geometry import (
    Arc2D,
    Pose,
    Segment3D,
    UnitVector,
    arc_distance,
    in_quadrilateral,
    project_point,
    project_segment,
    rotation_angle,
)
from .lines import LineMap3D, QueryLines2D, filter_lines_2d, filter_lines_3d
from .pipeline import LocalizeResult, localize
from .privacy import filter_keypoints_2d, filter_keypoints_3d
from .refine import (
    Correspondence,
    RansacConfig,
    oracle_matcher,
    refine_pose,
    solve_p3p,
)
from .rotations import RotationHypothesis, enumerate_rotations, kabsch
from .search import (
    DistanceField,
    QueryPointSet,
    RankedPose,
    SearchConfig,
    chamfer_rank,
    ldf_2d,
    ldf_3d,
    rank_poses,
    sample_query_points,
    translation_pool,
)
from .simulate import SimConfig, generate_scene, render_query

__version__ = "0.1.0"

__all__ = [
    "Arc2D",
    "Correspondence",
    "DistanceField",
    "LineMap3D",
    "LocalizeResult",
    "Pose",
    "PrincipalDirections2D",
    "PrincipalDirections3D",
    "QueryLines2D",
    "QueryPointSet",
    "RankedPose",
    "RansacConfig",
    "RotationHypothesis",
    "SearchConfig",
    "Segment3D",
    "SimConfig",
    "UnitVector",
    "arc_distance",
    "assign_lines_2d",
    "assign_lines_3d",
    "chamfer_rank",
    "directions_3d",
    "enumerate_rotations",
    "filter_keypoints_2d",
    "filter_keypoints_3d",
    "filter_lines_2d",
    "filter_lines_3d",
    "generate_scene",
    "in_quadrilateral",
    "kabsch",
    "ldf_2d",
    "ldf_3d",
    "localize",
    "oracle_matcher",
    "project_point",
    "project_segment",
    "rank_poses",
    "refine_pose",
    "render_query",
    "rotation_angle",
    "sample_query_points",
    "solve_p3p",
    "translation_pool",
    "vanishing_points_2d",
]
