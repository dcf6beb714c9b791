"""Write a synthetic scene/avatar dataset plus a ready-to-run impute config."""

import argparse
import json

from gesture_imputer.synth import write_dataset


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out_dir")
    p.add_argument("--rooms", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=float, nargs=3, default=(5.0, 4.0, 2.6), metavar=("X", "Y", "Z"))
    p.add_argument("--spacing", type=float, default=0.02,
                   help="surface sample spacing in m; keep it below the voxel size")
    p.add_argument("--furniture", type=int, default=3)
    args = p.parse_args()
    cfg = write_dataset(args.out_dir, args.rooms, args.seed, tuple(args.size), args.spacing,
                        args.furniture)
    print(json.dumps(cfg, indent=2))


if __name__ == "__main__":
    main()
