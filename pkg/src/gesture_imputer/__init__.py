"""Pointing-avatar scene augmentation and gesture grounding evaluation."""

from gesture_imputer.errors import *  # noqa: F401,F403
from gesture_imputer.scene import (
    AvatarModel,
    BoundingBox3D,
    PointCloud,
    SceneObject,
    YawTransform,
    compose_scene,
    load_avatar,
    load_scene,
    object_bbox,
    read_ply,
    write_ply,
)
from gesture_imputer.voxels import (
    OccupancyGrid,
    erase_object,
    project_xy,
    voxel_center,
    voxelize,
    world_to_voxel,
)
from gesture_imputer.boundary import FloorEstimate, boundary_mask, estimate_floor
from gesture_imputer.collision import (
    AvatarVolume,
    FootprintSet,
    find_noncollide,
    voxelize_avatar,
    voxelize_library,
)
from gesture_imputer.visibility import (
    ScoreGrid,
    path_enum_oracle,
    raycast_clear,
    visibility_grid,
)
from gesture_imputer.placement import (
    ImputationRecord,
    PlacementConfig,
    SceneInputs,
    feasible_points,
    impute,
    pose_avatar,
    select_avatar_variant,
)
from gesture_imputer.gestures import (
    FusionWeights,
    HandednessWeights,
    evaluate,
    hall_bucket,
    iou3d,
    pointing_bias,
    score_proposals,
)

__version__ = "0.1.0"
