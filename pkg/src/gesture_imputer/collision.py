"""Avatar voxel masks and the collision-free footprint search."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import fft as sfft
from scipy import ndimage

from gesture_imputer.errors import EmptyCloud, EmptyLibrary
from gesture_imputer.scene import AvatarModel
from gesture_imputer.voxels import _BIN_EPS, OccupancyGrid, _rasterize

DEFAULT_MARGIN_VOXELS = 10


@dataclass(frozen=True)
class AvatarVolume:
    """Voxelized avatar mask ``h`` plus keypoint cells inside it.

    ``h.origin`` is the local-frame position of cell (0, 0, 0); the XY margin
    is already included in ``h``.
    """

    h: OccupancyGrid
    foot_offset: tuple
    shoulder_offset_left: tuple
    shoulder_offset_right: tuple
    fingertip_offset_left: tuple
    fingertip_offset_right: tuple
    margin_voxels: int = 0
    hand: str = "right"

    @property
    def h_hv(self) -> int:
        return self.h.dims[2]

    @property
    def shoulder_offset(self) -> tuple:
        return self.shoulder_offset_left if self.hand == "left" else self.shoulder_offset_right


@dataclass(frozen=True, eq=False)
class FootprintSet:
    """Collision-free footprint corners; ``mask[i, j]`` marks corner (i, j) at layer ``floor_k``."""

    mask: np.ndarray
    floor_k: int

    @property
    def cells(self) -> set:
        return {(int(i), int(j)) for i, j in np.argwhere(self.mask)}

    def __contains__(self, ij) -> bool:
        i, j = ij
        return 0 <= i < self.mask.shape[0] and 0 <= j < self.mask.shape[1] and bool(self.mask[i, j])

    def __len__(self) -> int:
        return int(self.mask.sum())


def _dilate_xy(cells: np.ndarray, margin: int) -> np.ndarray:
    if margin <= 0:
        return cells
    size = 2 * margin + 1
    out = ndimage.maximum_filter1d(cells, size, axis=0, mode="constant")
    return ndimage.maximum_filter1d(out, size, axis=1, mode="constant")


def _avatar_volume(points: np.ndarray, keypoints: Mapping[str, np.ndarray], hand: str,
                   voxel_size: float, margin_voxels: int) -> AvatarVolume:
    if len(points) == 0:
        raise EmptyCloud("avatar cloud is empty")
    points = np.asarray(points, dtype=np.float64)
    lo = points.min(axis=0)
    top = np.floor((points.max(axis=0) - lo) / voxel_size + _BIN_EPS).astype(np.int64) + 1
    raw = _rasterize(points, lo, voxel_size, tuple(int(v) for v in top))
    m = int(margin_voxels)
    padded = np.zeros((raw.shape[0] + 2 * m, raw.shape[1] + 2 * m, raw.shape[2]), dtype=bool)
    padded[m:m + raw.shape[0], m:m + raw.shape[1]] = raw
    origin = lo - np.array([m * voxel_size, m * voxel_size, 0.0])
    h = OccupancyGrid(tuple(origin), voxel_size, _dilate_xy(padded, m))

    def cell(name):
        # annotated keypoints may sit a hair outside the sampled surface
        idx = np.floor((keypoints[name] - origin) / voxel_size + _BIN_EPS).astype(np.int64)
        return tuple(int(v) for v in np.clip(idx, 0, np.asarray(h.dims) - 1))

    return AvatarVolume(
        h=h,
        foot_offset=cell("foot"),
        shoulder_offset_left=cell("left_shoulder"),
        shoulder_offset_right=cell("right_shoulder"),
        fingertip_offset_left=cell("left_fingertip"),
        fingertip_offset_right=cell("right_fingertip"),
        margin_voxels=m,
        hand=hand,
    )


def voxelize_avatar(avatar: AvatarModel, voxel_size: float,
                    margin_voxels: int = DEFAULT_MARGIN_VOXELS) -> AvatarVolume:
    """Voxelize the avatar and widen its mask by ``margin_voxels`` in x and y only."""
    return _avatar_volume(avatar.cloud.points, avatar.keypoints, avatar.gesturing_hand,
                          voxel_size, margin_voxels)


def voxelize_library(library: Sequence[AvatarModel], voxel_size: float,
                     margin_voxels: int = DEFAULT_MARGIN_VOXELS) -> AvatarVolume:
    """One conservative mask covering every variant (all share the local frame).

    Keypoint offsets and the gesturing hand come from ``library[0]``.
    """
    if not library:
        raise EmptyLibrary("avatar library is empty")
    pts = np.concatenate([a.cloud.points.astype(np.float64) for a in library])
    ref = library[0]
    return _avatar_volume(pts, ref.keypoints, ref.gesturing_hand, voxel_size, margin_voxels)


def _correlate_layers(slab: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """out[i, j] = sum_{x,y,z} mask[x, y, z] * slab[i + x, j + y, z] over valid (i, j)."""
    nx, ny, _ = slab.shape
    hx, hy, _ = mask.shape
    shape = (sfft.next_fast_len(nx, real=True), sfft.next_fast_len(ny, real=True))
    acc = None
    for z in range(mask.shape[2]):
        if not mask[:, :, z].any() or not slab[:, :, z].any():
            continue
        prod = (sfft.rfft2(slab[:, :, z].astype(np.float64), shape)
                * np.conj(sfft.rfft2(mask[:, :, z].astype(np.float64), shape)))
        acc = prod if acc is None else acc + prod
    fx, fy = nx - hx + 1, ny - hy + 1
    if acc is None:
        return np.zeros((fx, fy))
    return sfft.irfft2(acc, shape)[:fx, :fy]


def find_noncollide(scene: OccupancyGrid, av: AvatarVolume, floor_k: int) -> FootprintSet:
    """Footprint corners where the avatar mask overlaps no occupied scene cell.

    A corner (i, j) qualifies when every set cell (x, y, z) of ``av.h`` maps to
    an in-grid, unoccupied scene cell (i + x, j + y, floor_k + z).
    """
    nx, ny, nz = scene.dims
    hx, hy, hz = av.h.dims
    if floor_k < 0 or floor_k + hz > nz:
        raise ValueError(f"avatar of height {hz} at layer {floor_k} exceeds grid height {nz}")
    fx, fy = nx - hx + 1, ny - hy + 1
    if fx <= 0 or fy <= 0:
        return FootprintSet(np.zeros((max(fx, 0), max(fy, 0)), dtype=bool), floor_k)
    overlap = _correlate_layers(scene.cells[:, :, floor_k:floor_k + hz], av.h.cells)
    # overlaps are integer counts; FFT noise is far below 0.5
    return FootprintSet(overlap < 0.5, floor_k)
