"""Time each pipeline stage on one synthetic room of roughly --points points."""

import argparse
import math
import time

import numpy as np

from gesture_imputer import synth
from gesture_imputer.boundary import boundary_mask, estimate_floor
from gesture_imputer.collision import find_noncollide, voxelize_library
from gesture_imputer.placement import PlacementConfig, SceneInputs, impute
from gesture_imputer.scene import object_bbox
from gesture_imputer.visibility import visibility_grid
from gesture_imputer.voxels import erase_object, project_xy, voxelize, world_to_voxel


def timed(label, fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    print(f"  {label:<18}{time.perf_counter() - t0:8.3f} s")
    return out


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--points", type=int, default=500_000)
    p.add_argument("--voxel-size", type=float, default=0.025)
    p.add_argument("--seed", type=int, default=3)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args()

    size = (6.0, 5.0, 3.0)
    area = size[0] * size[1] + 2 * (size[0] + size[1]) * size[2] + 10.0
    spacing = math.sqrt(area / args.points)
    room = synth.make_room("bench", np.random.default_rng(args.seed), size, 4, spacing)
    library = synth.make_library()
    scene = SceneInputs(room.scene_id, room.cloud, room.objects, room.floor_indices)
    cfg = PlacementConfig(voxel_size=args.voxel_size)
    print(f"{len(room.cloud)} points, spacing {spacing:.4f} m, voxel {args.voxel_size} m")

    impute(scene, room.target_id, library[:1], PlacementConfig(num_placements=1))  # JIT warm-up
    target = scene.object(room.target_id)
    print("stages:")
    v1 = timed("voxelize", voxelize, room.cloud, cfg.voxel_size)
    v2 = timed("erase_object", erase_object, v1, room.cloud, target)
    timed("boundary_mask", boundary_mask, project_xy(v1))
    floor = timed("estimate_floor", estimate_floor, room.cloud, room.floor_indices, v1)
    av = timed("avatar volume", voxelize_library, library, cfg.voxel_size, cfg.margin_voxels)
    timed("find_noncollide", find_noncollide, v1, av, floor.h_hat_fv)
    center = world_to_voxel(v2, object_bbox(room.cloud, target).center)
    timed("visibility_grid", visibility_grid, v2, center)

    runs = []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        out = impute(scene, room.target_id, library, cfg)
        runs.append(time.perf_counter() - t0)
    print(f"impute end-to-end: best {min(runs):.3f} s, median {np.median(runs):.3f} s, "
          f"{len(out)} placements")


if __name__ == "__main__":
    main()
