"""Agreement between the path-count visibility region and exact voxel ray casting.

For random sparse grids, reports the fraction of ray-visible cells whose
score exceeds the threshold, and the fraction of above-threshold cells that
are ray-visible, as obstacle density grows.
"""

import argparse

import numpy as np

from gesture_imputer.visibility import raycast_clear, visibility_grid
from gesture_imputer.voxels import OccupancyGrid, voxel_center


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--densities", type=float, nargs="+", default=(0.01, 0.02, 0.03, 0.05, 0.1))
    p.add_argument("--grids", type=int, default=20)
    p.add_argument("--probes", type=int, default=300)
    p.add_argument("--threshold", type=float, default=0.33)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    print(f"{'density':>8} {'ray-visible':>12} {'recall':>8} {'precision':>10}")
    for density in args.densities:
        rng = np.random.default_rng(args.seed)
        tp = fn = fp = 0
        for _ in range(args.grids):
            cells = rng.random((24, 24, 16)) < density
            c = (12, 12, 8)
            cells[c] = False
            g = OccupancyGrid((0, 0, 0), 1.0, cells)
            region = visibility_grid(g, c).region(args.threshold)
            src = voxel_center(g, c)
            for _ in range(args.probes):
                cell = tuple(int(rng.integers(d)) for d in g.dims)
                if cells[cell] or cell == c:
                    continue
                clear = raycast_clear(g, src, voxel_center(g, cell))
                tp += clear and region[cell]
                fn += clear and not region[cell]
                fp += (not clear) and region[cell]
        recall = tp / max(tp + fn, 1)
        precision = tp / max(tp + fp, 1)
        print(f"{density:8.3f} {tp + fn:12d} {recall:8.3f} {precision:10.3f}")


if __name__ == "__main__":
    main()
