"""Command-line front end.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 no placement
for any target.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from gesture_imputer.errors import DataError, FormatError, NoPlacement
from gesture_imputer.gestures import (
    FusionWeights,
    HandednessWeights,
    evaluate,
    format_report,
    score_proposals,
)
from gesture_imputer.placement import (
    DEFAULT_HUMAN_LABEL,
    PlacementConfig,
    SceneInputs,
    records_from_json,
    records_to_json,
    run_imputation,
)
from gesture_imputer.prompts import render_prompt
from gesture_imputer.scene import (
    BoundingBox3D,
    SceneObject,
    load_avatar,
    load_scene,
    load_segmentation,
    object_bbox,
    read_ply,
    write_ply,
    write_segmentation,
)
from gesture_imputer.visibility import visibility_grid
from gesture_imputer.voxels import erase_object, voxelize, world_to_voxel

log = logging.getLogger("gesture_imputer")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NO_PLACEMENT = 0, 2, 3, 4

_PLACEMENT_FIELDS = {f.name for f in dataclasses.fields(PlacementConfig)}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    placement: PlacementConfig = field(default_factory=PlacementConfig)
    scenes_dir: str = ""
    avatars_dir: str = ""
    out_dir: str = ""
    floor_label: str = "floor"
    human_semantic_label: int = DEFAULT_HUMAN_LABEL
    targets: list = field(default_factory=list)
    threads: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        placement = {k: doc.pop(k) for k in list(doc) if k in _PLACEMENT_FIELDS}
        known = {f.name for f in dataclasses.fields(cls)} - {"placement"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            targets = [(str(s), int(o)) for s, o in doc.pop("targets", [])]
            return cls(placement=PlacementConfig(**placement), targets=targets, **doc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def hashed_dict(self) -> dict:
        """Fields that determine outputs (no out_dir, no thread count)."""
        d = dataclasses.asdict(self.placement)
        d.update(scenes_dir=self.scenes_dir, avatars_dir=self.avatars_dir,
                 floor_label=self.floor_label, human_semantic_label=self.human_semantic_label,
                 targets=[list(t) for t in self.targets])
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.hashed_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:10]

    def validate(self) -> None:
        for name in ("scenes_dir", "avatars_dir"):
            path = getattr(self, name)
            if not path or not Path(path).is_dir():
                raise ConfigError(f"{name} {path!r} is not a directory")
        if not self.out_dir:
            raise ConfigError("out_dir is required")
        if not self.targets:
            raise ConfigError("no targets given")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")


# ------------------------------------------------------------------ impute


def _load_library(avatars_dir) -> list:
    metas = sorted(Path(avatars_dir).glob("*.json"))
    if not metas:
        raise ConfigError(f"no avatar metadata (*.json) in {avatars_dir}")
    return [load_avatar(m) for m in metas]


def _scene_paths(scenes_dir, scene_id):
    base = Path(scenes_dir)
    return base / f"{scene_id}.ply", base / f"{scene_id}.seg.json"


def _run_job(cfg: RunConfig, library, scene_id: str, object_id: int, tag: str) -> dict:
    ply, seg = _scene_paths(cfg.scenes_dir, scene_id)
    cloud, objects, floor_idx = load_scene(ply, seg, cfg.floor_label)
    scene = SceneInputs(scene_id, cloud, objects, floor_idx)
    try:
        res = run_imputation(scene, object_id, library, cfg.placement,
                             human_semantic_label=cfg.human_semantic_label)
    except NoPlacement as exc:
        log.warning("%s", exc)
        return {"scene_id": scene_id, "object_id": object_id, "placements": 0, "error": str(exc)}

    out = Path(cfg.out_dir)
    stem = f"{scene_id}_obj{object_id}"
    human_id = max(o.object_id for o in objects) + 1
    files = []
    for n, (aug, avatar) in enumerate(zip(res.clouds, res.avatars)):
        name = f"{stem}_p{n}_{tag}"
        write_ply(aug, out / f"{name}.ply", "binary_le")
        human = SceneObject(human_id, "person", np.arange(len(cloud), len(aug)))
        write_segmentation(out / f"{name}.seg.json", [*objects, human], cfg.floor_label)
        files.append(f"{name}.ply")
    rec_name = f"{stem}_{tag}.records.json"
    (out / rec_name).write_text(records_to_json(res.records))
    return {"scene_id": scene_id, "object_id": object_id, "placements": len(res.records),
            "feasible": len(res.feasible), "discarded": res.discarded,
            "records": rec_name, "ply": files}


def cmd_impute(args) -> int:
    doc = {}
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    overrides = {
        "seed": args.seed, "voxel_size": args.voxel_size, "jitter_deg": args.jitter_deg,
        "num_placements": args.num_placements, "visibility_threshold": args.visibility_threshold,
        "margin_voxels": args.margin_voxels, "threads": args.threads,
        "scenes_dir": args.scenes_dir, "avatars_dir": args.avatars_dir, "out_dir": args.out_dir,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.target:
        doc["targets"] = [_parse_target(t) for t in args.target]
    cfg = RunConfig.from_dict(doc)
    cfg.validate()

    library = _load_library(cfg.avatars_dir)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tag = f"{cfg.config_hash()}_s{cfg.placement.seed}"
    jobs = sorted(set(cfg.targets))
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        results = list(pool.map(lambda job: _run_job(cfg, library, job[0], job[1], tag), jobs))

    manifest = {"config_hash": cfg.config_hash(), "seed": cfg.placement.seed,
                "config": cfg.hashed_dict(), "jobs": results}
    (out / f"run_{tag}.json").write_text(json.dumps(manifest, indent=2) + "\n")
    placed = sum(r["placements"] for r in results)
    log.info("%d placements over %d targets -> %s", placed, len(jobs), out)
    return EXIT_OK if placed else EXIT_NO_PLACEMENT


def _parse_target(text: str):
    scene, _, obj = text.rpartition(":")
    if not scene or not obj.lstrip("-").isdigit():
        raise ConfigError(f"target must look like SCENE:OBJECT_ID, got {text!r}")
    return [scene, int(obj)]


# ------------------------------------------------------------------- score


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None


def cmd_score(args) -> int:
    records = records_from_json(Path(args.records).read_text())
    jobs = _load_json(args.proposals)
    if isinstance(jobs, dict):
        jobs = [jobs]
    rng = np.random.default_rng(args.seed)
    results = []
    for job in jobs:
        rec = records[int(job.get("record_index", 0))]
        ray = {"shoulder": rec.shoulder_world, "fingertip": rec.fingertip_world}
        left = job.get("left", ray)
        right = job.get("right", ray)
        boxes = [BoundingBox3D.from_array(b) for b in job["proposals"]]
        w_lr = (HandednessWeights(*job["w_lr"]) if "w_lr" in job
                else HandednessWeights.one_hot(rec.handedness))
        if args.random_lf:
            w_score = FusionWeights.random(rng)
        else:
            w_score = FusionWeights(*job.get("w_score", (0.5, 0.5)))
        s_final, best, parts = score_proposals(
            left["shoulder"], left["fingertip"], right["shoulder"], right["fingertip"],
            boxes, job["s_conf"], w_lr, w_score)
        results.append({
            "record_index": int(job.get("record_index", 0)),
            "w_lr": [w_lr.w_left, w_lr.w_right],
            "w_score": [w_score.w_conf, w_score.w_bias],
            "s_final": s_final.tolist(),
            "argmax": best,
            "ranking": [int(i) for i in np.argsort(-s_final, kind="stable")],
            **{k: v.tolist() for k, v in parts.items()},
        })
    text = json.dumps(results, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -------------------------------------------------------------------- eval


def cmd_eval(args) -> int:
    doc = _load_json(args.predictions)
    try:
        samples = [(BoundingBox3D.from_array(s["pred"]), BoundingBox3D.from_array(s["gt"]),
                    float(s["distance_m"])) for s in doc]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{args.predictions}: bad sample ({exc})") from None
    report = evaluate(samples)
    table = format_report(report)
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
        Path(args.out).with_suffix(".txt").write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


# ----------------------------------------------------------------- inspect


def cmd_inspect(args) -> int:
    if args.seg:
        cloud, objects, _ = load_scene(args.ply, args.seg)
    else:
        cloud, objects = read_ply(args.ply), []
    grid = voxelize(cloud, args.voxel_size, args.padding_voxels)
    print(f"dims={grid.dims} origin={tuple(round(v, 6) for v in grid.origin)} "
          f"occupied={int(grid.cells.sum())}")
    if args.grid_out:
        Path(args.grid_out).write_text(grid.dumps_rle() + "\n")
    if args.target is not None:
        match = [o for o in objects if o.object_id == args.target]
        if not match:
            raise ConfigError(f"object {args.target} not in segmentation (pass --seg)")
        v2 = erase_object(grid, cloud, match[0])
        center = world_to_voxel(v2, object_bbox(cloud, match[0]).center)
        scores = visibility_grid(v2, center)
        k = center[2] if args.z is None else args.z
        if not 0 <= k < grid.dims[2]:
            raise ConfigError(f"z slice {k} outside 0..{grid.dims[2] - 1}")
        csv = scores.slice_csv(k)
        if args.csv:
            Path(args.csv).write_text(csv)
        print(f"visibility from voxel {center}, slice z={k}, "
              f"visible fraction {float(scores.region().mean()):.4f}")
    return EXIT_OK


# ------------------------------------------------------------------ prompt


def cmd_prompt(args) -> int:
    records = records_from_json(Path(args.records).read_text())
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for n, rec in enumerate(records):
        label = args.label
        if label is None:
            if not args.scenes_dir:
                raise ConfigError("pass --label or --scenes-dir to look up target labels")
            _, seg = _scene_paths(args.scenes_dir, rec.scene_id)
            objects, _ = load_segmentation(seg)
            label = next((o.semantic_name for o in objects if o.object_id == rec.target_object_id), "")
        try:
            prompts = render_prompt(rec, label, args.n)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        name = f"{rec.scene_id}_obj{rec.target_object_id}_p{n}_s{rec.rng_seed}.prompt.txt"
        (out / name).write_text("\n\n".join(prompts) + "\n")
    return EXIT_OK


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gesture-imputer", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    imp = sub.add_parser("impute", help="place pointing avatars into scenes")
    imp.add_argument("--config", help="JSON run config; flags override it")
    imp.add_argument("--scenes-dir")
    imp.add_argument("--avatars-dir")
    imp.add_argument("--out-dir")
    imp.add_argument("--target", action="append", help="SCENE:OBJECT_ID (repeatable)")
    imp.add_argument("--seed", type=int)
    imp.add_argument("--voxel-size", type=float)
    imp.add_argument("--jitter-deg", type=float)
    imp.add_argument("--num-placements", type=int)
    imp.add_argument("--visibility-threshold", type=float)
    imp.add_argument("--margin-voxels", type=int)
    imp.add_argument("--threads", type=int)
    imp.set_defaults(func=cmd_impute)

    sc = sub.add_parser("score", help="rank proposals by language + pointing scores")
    sc.add_argument("--records", required=True)
    sc.add_argument("--proposals", required=True)
    sc.add_argument("--out")
    sc.add_argument("--random-lf", action="store_true",
                    help="draw fusion weights uniformly from the simplex")
    sc.add_argument("--seed", type=int, default=0)
    sc.set_defaults(func=cmd_score)

    ev = sub.add_parser("eval", help="IoU accuracy report with distance buckets")
    ev.add_argument("--predictions", required=True)
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)

    ins = sub.add_parser("inspect", help="dump occupancy / visibility slices")
    ins.add_argument("--ply", required=True)
    ins.add_argument("--seg")
    ins.add_argument("--voxel-size", type=float, default=0.025)
    ins.add_argument("--padding-voxels", type=int, default=0)
    ins.add_argument("--grid-out", help="write run-length-encoded grid JSON")
    ins.add_argument("--target", type=int, help="object id for the visibility slice")
    ins.add_argument("--z", type=int, help="slice index (default: target center layer)")
    ins.add_argument("--csv", help="write the visibility slice as CSV")
    ins.set_defaults(func=cmd_inspect)

    pr = sub.add_parser("prompt", help="write prompt text for expression generation")
    pr.add_argument("--records", required=True)
    pr.add_argument("--out-dir", required=True)
    pr.add_argument("--label")
    pr.add_argument("--scenes-dir")
    pr.add_argument("-n", type=int, default=3)
    pr.set_defaults(func=cmd_prompt)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
