"""Dense boolean occupancy grids built from point clouds."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from gesture_imputer.errors import EmptyCloud, OutOfBounds
from gesture_imputer.scene import PointCloud, SceneObject

DEFAULT_VOXEL_SIZE = 0.025

# Points within this fraction of a voxel below a cell boundary are binned
# upward. Sized for float32 storage, which turns 0.7 into 0.69999999.
_BIN_EPS = 1e-4


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """``cells[i, j, k]`` is True when voxel (i, j, k) is occupied.

    Voxel (i, j, k) spans ``[origin + (i, j, k) * voxel_size, origin + (i+1, j+1, k+1) * voxel_size)``.
    """

    origin: tuple
    voxel_size: float
    cells: np.ndarray

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise ValueError("voxel_size must be positive")
        cells = np.asarray(self.cells, dtype=bool)
        if cells.ndim != 3 or min(cells.shape) < 1:
            raise ValueError(f"cells must be a nonempty 3D array, got shape {cells.shape}")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "origin", tuple(float(v) for v in self.origin))
        object.__setattr__(self, "voxel_size", float(self.voxel_size))

    @property
    def dims(self) -> tuple:
        return self.cells.shape

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (self.origin == other.origin and self.voxel_size == other.voxel_size
                and np.array_equal(self.cells, other.cells))

    __hash__ = None

    def with_cells(self, cells: np.ndarray) -> "OccupancyGrid":
        return OccupancyGrid(self.origin, self.voxel_size, cells)

    def indices_of(self, pts) -> np.ndarray:
        """Unclipped integer voxel indices of world points, shape (N, 3)."""
        rel = (np.asarray(pts, dtype=np.float64).reshape(-1, 3) - np.asarray(self.origin))
        return np.floor(rel / self.voxel_size + _BIN_EPS).astype(np.int64)

    def in_bounds(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx).reshape(-1, 3)
        return np.all((idx >= 0) & (idx < np.asarray(self.dims)), axis=1)

    def to_rle(self) -> dict:
        """Run-length dump: C-order over (i, j, k), alternating runs starting with zeros."""
        flat = self.cells.ravel().astype(np.int8)
        change = np.flatnonzero(np.diff(flat)) + 1
        bounds = np.concatenate([[0], change, [flat.size]])
        runs = np.diff(bounds).tolist()
        if flat.size and flat[0] == 1:
            runs = [0] + runs
        return {
            "dims": list(self.dims),
            "voxel_size": self.voxel_size,
            "origin": list(self.origin),
            "rle": runs,
        }

    @classmethod
    def from_rle(cls, doc: dict) -> "OccupancyGrid":
        flat = np.zeros(int(np.prod(doc["dims"])), dtype=bool)
        pos, val = 0, False
        for run in doc["rle"]:
            flat[pos:pos + run] = val
            pos += run
            val = not val
        if pos != flat.size:
            raise ValueError("RLE runs do not cover the grid")
        return cls(tuple(doc["origin"]), doc["voxel_size"], flat.reshape(doc["dims"]))

    def dumps_rle(self) -> str:
        return json.dumps(self.to_rle(), separators=(",", ":"))


def _rasterize(pts: np.ndarray, origin, voxel_size: float, dims) -> np.ndarray:
    cells = np.zeros(dims, dtype=bool)
    if len(pts) == 0:
        return cells
    idx = np.floor((pts.astype(np.float64) - np.asarray(origin)) / voxel_size + _BIN_EPS).astype(np.int64)
    np.clip(idx, 0, np.asarray(dims) - 1, out=idx)
    cells[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return cells


def voxelize(cloud: PointCloud, voxel_size: float = DEFAULT_VOXEL_SIZE,
             padding_voxels: int = 0) -> OccupancyGrid:
    if len(cloud) == 0:
        raise EmptyCloud("cannot voxelize an empty cloud")
    if not voxel_size > 0:
        raise ValueError("voxel_size must be positive")
    pts = cloud.points.astype(np.float64)
    origin = pts.min(axis=0) - padding_voxels * voxel_size
    top = np.floor((pts.max(axis=0) - origin) / voxel_size + _BIN_EPS).astype(np.int64)
    dims = tuple(int(v) + 1 + padding_voxels for v in top)
    return OccupancyGrid(tuple(origin), voxel_size, _rasterize(pts, origin, voxel_size, dims))


def world_to_voxel(grid: OccupancyGrid, p) -> tuple:
    idx = grid.indices_of(p)[0]
    if not grid.in_bounds(idx)[0]:
        raise OutOfBounds(f"point {tuple(p)} maps to voxel {tuple(idx)} outside {grid.dims}")
    return tuple(int(v) for v in idx)


def voxel_center(grid: OccupancyGrid, idx) -> np.ndarray:
    return np.asarray(grid.origin) + (np.asarray(idx, dtype=np.float64) + 0.5) * grid.voxel_size


def erase_object(grid: OccupancyGrid, cloud: PointCloud, obj: SceneObject) -> OccupancyGrid:
    """Occupancy recomputed from every point of ``cloud`` except ``obj``'s."""
    obj.check(cloud)
    keep = np.ones(len(cloud), dtype=bool)
    keep[obj.point_indices] = False
    return grid.with_cells(_rasterize(cloud.points[keep], grid.origin, grid.voxel_size, grid.dims))


def project_xy(grid: OccupancyGrid) -> np.ndarray:
    return grid.cells.any(axis=2)
