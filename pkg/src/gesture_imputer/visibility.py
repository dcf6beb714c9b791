"""Path-counting visibility from a target voxel, plus two independent checks.

``visibility_grid`` runs the monotone path-counting recurrence outward from
the target in each of the 8 octants. ``path_enum_oracle`` enumerates lattice
paths explicitly with exact integers, and ``raycast_clear`` walks a voxel ray.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numba
import numpy as np

from gesture_imputer.errors import CenterOccupied, OutOfBounds, TooLarge
from gesture_imputer.voxels import OccupancyGrid

VISIBILITY_THRESHOLD = 0.33
ORACLE_MAX_STEPS = 12


@dataclass(frozen=True, eq=False)
class ScoreGrid:
    origin_index: tuple
    scores: np.ndarray

    def __post_init__(self):
        self.scores.flags.writeable = False

    def region(self, threshold: float = VISIBILITY_THRESHOLD) -> np.ndarray:
        """Thresholded region of visibility (strictly greater than ``threshold``)."""
        return self.scores > threshold

    def slice_csv(self, k: int) -> str:
        buf = io.StringIO()
        np.savetxt(buf, self.scores[:, :, k], fmt="%.6f", delimiter=",")
        return buf.getvalue()


@numba.njit(cache=True)
def _octant_scores(free, out):
    nu, nv, nw = free.shape
    for u in range(nu):
        for v in range(nv):
            for w in range(nw):
                if not free[u, v, w]:
                    out[u, v, w] = 0.0
                    continue
                n = u + v + w
                if n == 0:
                    out[u, v, w] = 1.0
                    continue
                acc = 0.0
                if u > 0:
                    acc += u * out[u - 1, v, w]
                if v > 0:
                    acc += v * out[u, v - 1, w]
                if w > 0:
                    acc += w * out[u, v, w - 1]
                out[u, v, w] = acc / n


def _octant_slices(center):
    for signs in product((1, -1), repeat=3):
        yield tuple(slice(c, None, s) for c, s in zip(center, signs))


def visibility_grid(v2: OccupancyGrid, center) -> ScoreGrid:
    """Score every cell by the fraction of monotone lattice paths from ``center`` that stay free.

    Cells on the axis planes through ``center`` are shared by neighbouring
    octants; each octant computes them with identical arithmetic.
    """
    center = tuple(int(c) for c in center)
    if not all(0 <= c < d for c, d in zip(center, v2.dims)):
        raise OutOfBounds(f"center {center} outside grid {v2.dims}")
    if v2.cells[center]:
        raise CenterOccupied(f"center voxel {center} is occupied; erase the target first")
    free = ~v2.cells
    scores = np.zeros(v2.dims, dtype=np.float64)
    for sl in _octant_slices(center):
        _octant_scores(free[sl], scores[sl])
    return ScoreGrid(center, scores)


# ------------------------------------------------------------------ oracles


def _count_paths(free: np.ndarray, center, signs, limits, max_sum: int, target=None):
    """Enumerate monotone paths from ``center`` in one octant.

    Returns {local (u, v, w): [sum of path weight numerators, denominator]}
    over paths whose every visited cell is free. Each path weight is the
    product over its steps of (coordinate stepped into) / (coordinate sum).
    """
    totals: dict = {}
    if not free[center]:
        return totals
    stack = [((0, 0, 0), 1, 1)]
    while stack:
        loc, num, den = stack.pop()
        if target is None or loc == target:
            entry = totals.setdefault(loc, [0, den])
            if entry[1] != den:
                raise AssertionError("path denominators disagree")
            entry[0] += num
        if sum(loc) >= max_sum:
            continue
        for axis in range(3):
            nxt = list(loc)
            nxt[axis] += 1
            if nxt[axis] > limits[axis]:
                continue
            cell = tuple(c + s * l for c, s, l in zip(center, signs, nxt))
            if not free[cell]:
                continue
            stack.append((tuple(nxt), num * nxt[axis], den * sum(nxt)))
    return totals


def path_enum_oracle(v2: OccupancyGrid, center, cell, max_steps: int = ORACLE_MAX_STEPS) -> float:
    """Visibility of one ``cell`` by explicit enumeration of every monotone path."""
    center = tuple(int(c) for c in center)
    cell = tuple(int(c) for c in cell)
    for idx in (center, cell):
        if not all(0 <= c < d for c, d in zip(idx, v2.dims)):
            raise OutOfBounds(f"voxel {idx} outside grid {v2.dims}")
    local = tuple(abs(a - c) for a, c in zip(cell, center))
    if sum(local) > max_steps:
        raise TooLarge(f"{sum(local)} steps exceeds enumeration bound {max_steps}")
    signs = tuple(1 if a >= c else -1 for a, c in zip(cell, center))
    totals = _count_paths(~v2.cells, center, signs, local, sum(local), target=local)
    if local not in totals:
        return 0.0
    num, den = totals[local]
    return float(Fraction(num, den))


def path_enum_all(v2: OccupancyGrid, center, max_sum: int) -> dict:
    """Exact visibility of every cell within ``max_sum`` steps of ``center``.

    Returns {cell index: Fraction}; cells that no free path reaches are
    reported as 0.
    """
    center = tuple(int(c) for c in center)
    free = ~v2.cells
    out: dict = {}
    for signs in product((1, -1), repeat=3):
        limits = tuple((d - 1 - c) if s > 0 else c for c, d, s in zip(center, v2.dims, signs))
        totals = _count_paths(free, center, signs, limits, max_sum)
        for lu in range(limits[0] + 1):
            for lv in range(limits[1] + 1):
                for lw in range(limits[2] + 1):
                    if lu + lv + lw > max_sum:
                        continue
                    cell = tuple(c + s * l for c, s, l in zip(center, signs, (lu, lv, lw)))
                    num_den = totals.get((lu, lv, lw))
                    out[cell] = Fraction(num_den[0], num_den[1]) if num_den else Fraction(0)
    return out


def raycast_clear(grid: OccupancyGrid, a, b) -> bool:
    """True when every voxel strictly between the voxels of ``a`` and ``b`` is free.

    Amanatides-Woo traversal. When the segment crosses an edge or corner
    exactly, both neighbouring voxels are visited (conservative).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ia, ib = grid.indices_of(a)[0], grid.indices_of(b)[0]
    if not (grid.in_bounds(ia)[0] and grid.in_bounds(ib)[0]):
        raise OutOfBounds("ray endpoints must lie inside the grid")
    remaining = np.abs(ib - ia)
    steps = int(remaining.sum())
    if steps == 0:
        return True
    d = b - a
    s = grid.voxel_size
    origin = np.asarray(grid.origin)
    step = np.sign(ib - ia).astype(np.int64)
    t_max = np.full(3, math.inf)
    t_delta = np.full(3, math.inf)
    for ax in range(3):
        if step[ax] == 0 or d[ax] == 0:
            continue
        edge = origin[ax] + (ia[ax] + (1 if step[ax] > 0 else 0)) * s
        t_max[ax] = (edge - a[ax]) / d[ax]
        t_delta[ax] = s / abs(d[ax])
    cur = ia.copy()
    cells = grid.cells
    for n in range(steps):
        candidates = [ax for ax in range(3) if remaining[ax] > 0]
        ax = min(candidates, key=lambda k: (t_max[k], k))
        for other in candidates:
            # exact edge/corner crossing: the skipped neighbour counts too
            if other != ax and abs(t_max[other] - t_max[ax]) <= 1e-12:
                side = cur.copy()
                side[other] += step[other]
                if not np.array_equal(side, ib) and cells[side[0], side[1], side[2]]:
                    return False
        cur[ax] += step[ax]
        remaining[ax] -= 1
        t_max[ax] += t_delta[ax]
        if n == steps - 1:
            break
        if cells[cur[0], cur[1], cur[2]]:
            return False
    return True
