"""Feasible avatar placements, pointing pose, and the end-to-end imputation run."""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from gesture_imputer.boundary import (
    FLOOR_OFFSET_M,
    MIN_FLOOR_VOXELS,
    BoundaryMask,
    FloorEstimate,
    boundary_mask,
    estimate_floor,
)
from gesture_imputer.collision import (
    DEFAULT_MARGIN_VOXELS,
    AvatarVolume,
    FootprintSet,
    find_noncollide,
    voxelize_library,
)
from gesture_imputer.errors import DegeneratePointing, EmptyLibrary, NoPlacement
from gesture_imputer.scene import (
    AvatarModel,
    BoundingBox3D,
    PointCloud,
    SceneObject,
    YawTransform,
    compose_scene,
    object_bbox,
)
from gesture_imputer.visibility import VISIBILITY_THRESHOLD, ScoreGrid, visibility_grid
from gesture_imputer.voxels import (
    DEFAULT_VOXEL_SIZE,
    OccupancyGrid,
    erase_object,
    project_xy,
    voxelize,
    world_to_voxel,
)

DEFAULT_JITTER_DEG = 9.0
DEFAULT_NUM_PLACEMENTS = 5
DEFAULT_HUMAN_LABEL = 99


@dataclass(frozen=True)
class PlacementConfig:
    voxel_size: float = DEFAULT_VOXEL_SIZE
    margin_voxels: int = DEFAULT_MARGIN_VOXELS
    C1: float = FLOOR_OFFSET_M
    C2: int = MIN_FLOOR_VOXELS
    visibility_threshold: float = VISIBILITY_THRESHOLD
    jitter_deg: float = DEFAULT_JITTER_DEG
    num_placements: int = DEFAULT_NUM_PLACEMENTS
    seed: int = 0
    # "shoulder": score probed at the gesturing-shoulder voxel; "foot": at the foot voxel
    visibility_probe: str = "shoulder"
    padding_voxels: int = 0

    def __post_init__(self):
        if self.num_placements < 1:
            raise ValueError("num_placements must be >= 1")
        if self.visibility_probe not in ("shoulder", "foot"):
            raise ValueError(f"visibility_probe must be shoulder|foot, got {self.visibility_probe!r}")
        if self.jitter_deg < 0:
            raise ValueError("jitter_deg must be non-negative")


@dataclass(frozen=True)
class ImputationRecord:
    scene_id: str
    target_object_id: int
    avatar_id: str
    handedness: str
    foot_position_world: tuple
    yaw_deg: float
    jitter_deg: float
    pointing_elevation_deg: float
    shoulder_world: tuple
    fingertip_world: tuple
    distance_to_target_m: float
    rng_seed: int

    def to_json_dict(self) -> dict:
        d = asdict(self)
        for key, val in d.items():
            if isinstance(val, float):
                d[key] = _sig9(val)
            elif isinstance(val, tuple):
                d[key] = [_sig9(v) for v in val]
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "ImputationRecord":
        kw = dict(d)
        for key in ("foot_position_world", "shoulder_world", "fingertip_world"):
            kw[key] = tuple(float(v) for v in kw[key])
        return cls(**kw)


def _sig9(x: float) -> float:
    return float(f"{float(x):.9g}")


def records_to_json(records: Sequence[ImputationRecord]) -> str:
    return json.dumps([r.to_json_dict() for r in records], indent=2) + "\n"


def records_from_json(text: str) -> list:
    return [ImputationRecord.from_json_dict(d) for d in json.loads(text)]


# -------------------------------------------------------------- feasibility


def feasible_points(
    B: BoundaryMask,
    footprints: FootprintSet,
    s_grid: ScoreGrid,
    av: AvatarVolume,
    floor_k: int,
    tau: float = VISIBILITY_THRESHOLD,
    probe: str = "shoulder",
) -> list:
    """Footprint corners that are in bounds, collision-free and visible, sorted."""
    ii, jj = np.nonzero(footprints.mask)
    if ii.size == 0:
        return []
    fo = av.foot_offset
    inside = B.mask[ii + fo[0], jj + fo[1]]
    if probe == "shoulder":
        sh = av.shoulder_offset
        seen = s_grid.scores[ii + sh[0], jj + sh[1], floor_k + sh[2]] > tau
    else:
        seen = s_grid.scores[ii + fo[0], jj + fo[1], floor_k + fo[2]] > tau
    keep = inside & seen
    return [(int(i), int(j)) for i, j in zip(ii[keep], jj[keep])]


# ---------------------------------------------------------------- posing


def _azimuth(v) -> float:
    return math.atan2(v[1], v[0])


def _wrap_deg(a: float) -> float:
    a = math.fmod(a + 180.0, 360.0)
    if a <= 0:
        a += 360.0
    return a - 180.0


def pose_avatar(avatar: AvatarModel, foot_world, target_center, jitter_deg_max: float,
                rng: np.random.Generator):
    """Yaw the avatar about the vertical so its arm points at the target.

    The foot stays at ``foot_world``. The yaw is solved so that the arm's
    azimuth differs from the shoulder-to-target azimuth by exactly the sampled
    jitter, measured at the *final* shoulder position.

    Returns ``(transform, fields)`` where ``fields`` holds the pose-related
    ImputationRecord entries.
    """
    foot_world = np.asarray(foot_world, dtype=np.float64)
    target = np.asarray(target_center, dtype=np.float64)
    f = avatar.keypoints["foot"]
    sh, ft = avatar.shoulder, avatar.fingertip

    arm = (ft - sh)[:2]
    if np.hypot(*arm) < 1e-12:
        raise DegeneratePointing(f"avatar {avatar.avatar_id}: arm is vertical, azimuth undefined")
    e = arm / np.hypot(*arm)
    jitter = float(rng.uniform(-jitter_deg_max, jitter_deg_max)) if jitter_deg_max > 0 else 0.0
    c, s = math.cos(math.radians(-jitter)), math.sin(math.radians(-jitter))
    e_j = np.array([c * e[0] - s * e[1], s * e[0] + c * e[1]])

    # In the avatar frame the target must sit on the ray shoulder + t * e_j,
    # at the same distance from the foot as in the world.
    d = (sh - f)[:2]
    D = (target - foot_world)[:2]
    b = float(d @ e_j)
    disc = b * b - float(d @ d) + float(D @ D)
    if disc < 0:
        raise DegeneratePointing("target lies inside the shoulder's turning circle")
    t = -b + math.sqrt(disc)
    if t <= 1e-9:
        raise DegeneratePointing("target is directly above or below the shoulder")
    target_local = d + t * e_j
    yaw = math.degrees(_azimuth(D) - _azimuth(target_local))
    yaw = _wrap_deg(yaw)

    rot = YawTransform(yaw).rotation
    transform = YawTransform(yaw, tuple(foot_world - rot @ f))
    shoulder_w = transform.apply(sh)
    fingertip_w = transform.apply(ft)
    to_target = target - shoulder_w
    horiz = math.hypot(to_target[0], to_target[1])
    fields = {
        "handedness": avatar.gesturing_hand,
        "foot_position_world": tuple(float(v) for v in foot_world),
        "yaw_deg": yaw,
        "jitter_deg": jitter,
        "pointing_elevation_deg": math.degrees(math.atan2(to_target[2], horiz)),
        "shoulder_world": tuple(float(v) for v in shoulder_w),
        "fingertip_world": tuple(float(v) for v in fingertip_w),
        "distance_to_target_m": float(np.linalg.norm(to_target)),
    }
    return transform, fields


def select_avatar_variant(library: Sequence[AvatarModel], elevation_deg: float,
                          rng: np.random.Generator) -> AvatarModel:
    """Uniform pick among the variants whose arm elevation is closest to ``elevation_deg``."""
    if not library:
        raise EmptyLibrary("avatar library is empty")
    gaps = np.array([abs(a.arm_elevation_deg - elevation_deg) for a in library])
    best = np.flatnonzero(gaps <= gaps.min() + 1e-9)
    return library[int(best[rng.integers(len(best))])]


# ------------------------------------------------------------- pipeline


@dataclass(frozen=True, eq=False)
class SceneInputs:
    scene_id: str
    cloud: PointCloud
    objects: Sequence[SceneObject]
    floor_indices: np.ndarray
    floor_override: float | None = None

    def object(self, object_id: int) -> SceneObject:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        raise NoPlacement(f"scene {self.scene_id}: no object with id {object_id}")


@dataclass(eq=False)
class ImputationResult:
    """Everything a run produced; ``records[n]`` pairs with ``clouds[n]``."""

    v1: OccupancyGrid
    v2: OccupancyGrid
    boundary: BoundaryMask
    floor: FloorEstimate
    av: AvatarVolume
    footprints: FootprintSet
    scores: ScoreGrid
    target_box: BoundingBox3D
    feasible: list
    records: list = field(default_factory=list)
    clouds: list = field(default_factory=list)
    corners: list = field(default_factory=list)
    transforms: list = field(default_factory=list)
    avatars: list = field(default_factory=list)
    discarded: int = 0


def job_rng(seed: int, scene_id: str, target_object_id: int) -> np.random.Generator:
    """Per (scene, target) stream, independent of job scheduling order."""
    ss = np.random.SeedSequence([int(seed) % 2**32, zlib.crc32(scene_id.encode()),
                                 int(target_object_id) % 2**32])
    return np.random.default_rng(ss)


def posed_avatar_fits(v1: OccupancyGrid, B: BoundaryMask, avatar: AvatarModel,
                      transform: YawTransform) -> bool:
    """Every posed avatar point lands in a free in-grid voxel and the foot is inside B."""
    idx = v1.indices_of(transform.apply(avatar.cloud.points))
    if not v1.in_bounds(idx).all():
        return False
    if v1.cells[idx[:, 0], idx[:, 1], idx[:, 2]].any():
        return False
    foot = v1.indices_of(transform.apply(avatar.keypoints["foot"]))[0]
    return bool(v1.in_bounds(foot)[0] and B.mask[foot[0], foot[1]])


def run_imputation(scene: SceneInputs, target_object_id: int, library: Sequence[AvatarModel],
                   cfg: PlacementConfig = PlacementConfig(), rng: np.random.Generator | None = None,
                   human_semantic_label: int = DEFAULT_HUMAN_LABEL) -> ImputationResult:
    if not library:
        raise EmptyLibrary("avatar library is empty")
    if rng is None:
        rng = job_rng(cfg.seed, scene.scene_id, target_object_id)
    cloud = scene.cloud
    target = scene.object(target_object_id)

    v1 = voxelize(cloud, cfg.voxel_size, cfg.padding_voxels)
    v2 = erase_object(v1, cloud, target)
    B = boundary_mask(project_xy(v1))
    floor = estimate_floor(cloud, scene.floor_indices, v1, cfg.C1, cfg.C2, scene.floor_override)
    av = voxelize_library(library, cfg.voxel_size, cfg.margin_voxels)
    k = floor.h_hat_fv
    try:
        footprints = find_noncollide(v1, av, k)
    except ValueError as exc:
        raise NoPlacement(f"scene {scene.scene_id}: {exc}") from None

    box = object_bbox(cloud, target)
    target_center = box.center
    scores = visibility_grid(v2, world_to_voxel(v2, target_center))
    feas = feasible_points(B, footprints, scores, av, k, cfg.visibility_threshold,
                           cfg.visibility_probe)
    result = ImputationResult(v1, v2, B, floor, av, footprints, scores, box, feas)
    if not feas:
        raise NoPlacement(f"scene {scene.scene_id}, target {target_object_id}: no feasible point")

    ref = library[0]
    base = np.asarray(v1.origin) - np.asarray(av.h.origin)
    for n in rng.permutation(len(feas)):
        if len(result.records) == cfg.num_placements:
            break
        i, j = feas[int(n)]
        child = rng.spawn(1)[0]
        foot_world = base + np.array([i, j, k]) * cfg.voxel_size + ref.keypoints["foot"]
        try:
            _, ref_fields = pose_avatar(ref, foot_world, target_center, 0.0, child)
            avatar = select_avatar_variant(library, ref_fields["pointing_elevation_deg"], child)
            transform, fields = pose_avatar(avatar, foot_world, target_center, cfg.jitter_deg, child)
        except DegeneratePointing:
            result.discarded += 1
            continue
        if not posed_avatar_fits(v1, B, avatar, transform):
            result.discarded += 1
            continue
        record = ImputationRecord(
            scene_id=scene.scene_id,
            target_object_id=int(target_object_id),
            avatar_id=avatar.avatar_id,
            rng_seed=int(cfg.seed),
            **fields,
        )
        result.records.append(record)
        result.clouds.append(compose_scene(cloud, avatar, transform, human_semantic_label))
        result.corners.append((i, j))
        result.transforms.append(transform)
        result.avatars.append(avatar)

    if not result.records:
        raise NoPlacement(
            f"scene {scene.scene_id}, target {target_object_id}: "
            f"all {len(feas)} feasible points failed re-validation"
        )
    return result


def impute(scene: SceneInputs, target_object_id: int, library: Sequence[AvatarModel],
           cfg: PlacementConfig = PlacementConfig(), rng: np.random.Generator | None = None,
           human_semantic_label: int = DEFAULT_HUMAN_LABEL) -> list:
    """Place up to ``cfg.num_placements`` pointing avatars; returns [(cloud, record), ...]."""
    res = run_imputation(scene, target_object_id, library, cfg, rng, human_semantic_label)
    return list(zip(res.clouds, res.records))
