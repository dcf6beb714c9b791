"""In-scene boundary mask and floor height estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from gesture_imputer.errors import EmptyScene, MissingFloor
from gesture_imputer.scene import PointCloud
from gesture_imputer.voxels import _BIN_EPS, OccupancyGrid

FLOOR_OFFSET_M = 0.04
FLOOR_PERCENTILE = 85
MIN_FLOOR_VOXELS = 4

_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True, eq=False)
class BoundaryMask:
    """XY mask of cells inside the scene's outer contour (broadcast over z)."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        m.flags.writeable = False
        object.__setattr__(self, "mask", m)


@dataclass(frozen=True)
class FloorEstimate:
    h_flr: float
    h_fv: int
    h_hat_fv: int


def boundary_mask(xy_mask: np.ndarray) -> BoundaryMask:
    """Largest 4-connected component of ``xy_mask`` with its holes filled.

    Ties on component size go to the component met first in C order.
    """
    xy_mask = np.asarray(xy_mask, dtype=bool)
    labels, n = ndimage.label(xy_mask, structure=_FOUR_CONNECTED)
    if n == 0:
        raise EmptyScene("projected scene has no occupied cell")
    sizes = np.bincount(labels.ravel())[1:]
    largest = labels == (int(np.argmax(sizes)) + 1)
    return BoundaryMask(ndimage.binary_fill_holes(largest, structure=_FOUR_CONNECTED))


def nearest_rank_percentile(values, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value (1-based)."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("percentile of an empty sequence")
    rank = max(1, math.ceil(pct / 100.0 * v.size - 1e-12))
    return float(v[rank - 1])


def estimate_floor(
    cloud: PointCloud,
    floor_indices,
    grid: OccupancyGrid,
    C1: float = FLOOR_OFFSET_M,
    C2: int = MIN_FLOOR_VOXELS,
    override: float | None = None,
) -> FloorEstimate:
    """Floor height in world z and on the voxel scale.

    ``h_flr = min(mean(z) + C1, P85(z))`` over the floor points; ``override``
    replaces ``h_flr`` when the scene has no labeled floor.
    """
    floor_indices = np.asarray(floor_indices, dtype=np.int64).reshape(-1)
    if override is not None:
        h_flr = float(override)
    elif floor_indices.size == 0:
        raise MissingFloor("no floor points and no floor height override")
    else:
        z = cloud.points[floor_indices, 2].astype(np.float64)
        # fsum keeps the mean independent of point order
        mean = math.fsum(z) / z.size
        h_flr = min(mean + C1, nearest_rank_percentile(z, FLOOR_PERCENTILE))
    h_fv = math.floor((h_flr - grid.origin[2]) / grid.voxel_size + _BIN_EPS)
    return FloorEstimate(h_flr, int(h_fv), int(max(C2, h_fv)))
