import json

import numpy as np
import pytest

from gesture_imputer import synth
from gesture_imputer.cli import RunConfig, main
from gesture_imputer.placement import ImputationRecord, records_from_json
from gesture_imputer.prompts import render_prompt
from gesture_imputer.scene import read_ply


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("ds")
    cfg = synth.write_dataset(root, n_rooms=2, seed=1, size=(4.5, 4.0, 2.5), spacing=0.02)
    return root, cfg


@pytest.fixture(scope="module")
def impute_run(dataset, tmp_path_factory):
    root, _ = dataset
    out = tmp_path_factory.mktemp("out")
    rc = main(["impute", "--config", str(root / "config.json"), "--out-dir", str(out),
               "--num-placements", "3", "--seed", "5"])
    return rc, out


def test_impute_outputs(impute_run):
    rc, out = impute_run
    assert rc == 0
    manifests = list(out.glob("run_*_s5.json"))
    assert len(manifests) == 1
    doc = json.loads(manifests[0].read_text())
    tag = f"{doc['config_hash']}_s5"
    assert all(tag in p.name for p in out.iterdir())
    for job in doc["jobs"]:
        assert job["placements"] == 3
        recs = records_from_json((out / job["records"]).read_text())
        assert [r.rng_seed for r in recs] == [5, 5, 5]
        for name in job["ply"]:
            cloud = read_ply(out / name)
            seg = json.loads((out / name.replace(".ply", ".seg.json")).read_text())
            person = [o for o in seg["objects"] if o["label"] == "person"]
            assert len(person) == 1
            assert max(person[0]["point_indices"]) == len(cloud) - 1


def test_impute_threads_do_not_change_output(dataset, impute_run, tmp_path):
    root, _ = dataset
    _, first = impute_run
    rc = main(["impute", "--config", str(root / "config.json"), "--out-dir", str(tmp_path),
               "--num-placements", "3", "--seed", "5", "--threads", "2"])
    assert rc == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in tmp_path.iterdir())
    for n in names:
        if n.endswith((".ply", ".records.json")):
            assert (first / n).read_bytes() == (tmp_path / n).read_bytes()


def test_config_hash_ignores_out_dir_and_threads():
    a = RunConfig.from_dict({"out_dir": "a", "threads": 1, "targets": [["s", 1]]})
    b = RunConfig.from_dict({"out_dir": "b", "threads": 4, "targets": [["s", 1]]})
    c = RunConfig.from_dict({"out_dir": "a", "seed": 2, "targets": [["s", 1]]})
    assert a.config_hash() == b.config_hash() != c.config_hash()
    assert len(a.config_hash()) == 10


def test_usage_errors(dataset, tmp_path):
    root, _ = dataset
    assert main([]) == 2
    assert main(["impute", "--bogus"]) == 2
    assert main(["impute", "--config", str(tmp_path / "nope.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"mystery": 1}))
    assert main(["impute", "--config", str(bad)]) == 2
    assert main(["impute", "--config", str(root / "config.json"), "--out-dir", str(tmp_path),
                 "--target", "no-colon"]) == 2
    assert main(["impute", "--config", str(root / "config.json"), "--out-dir", str(tmp_path),
                 "--num-placements", "0"]) == 2


def test_data_error_exit(dataset, tmp_path):
    root, cfg = dataset
    scenes = tmp_path / "scenes"
    scenes.mkdir()
    (scenes / "broken.ply").write_text("ply\nformat ascii 1.0\nelement vertex 1\n")
    (scenes / "broken.seg.json").write_text('{"objects": []}')
    rc = main(["impute", "--scenes-dir", str(scenes), "--avatars-dir", cfg["avatars_dir"],
               "--out-dir", str(tmp_path / "o"), "--target", "broken:0"])
    assert rc == 3


def test_no_placement_exit(dataset, tmp_path):
    root, cfg = dataset
    scene = cfg["targets"][0][0]
    rc = main(["impute", "--config", str(root / "config.json"), "--out-dir", str(tmp_path),
               "--target", f"{scene}:999"])
    assert rc == 4


def _record(**kw):
    base = dict(scene_id="scene0", target_object_id=7, avatar_id="right_+0", handedness="right",
                foot_position_world=(1.0, 2.0, 0.0), yaw_deg=30.0, jitter_deg=-2.0,
                pointing_elevation_deg=-20.0, shoulder_world=(1.0, 2.0, 1.4),
                fingertip_world=(1.5, 2.3, 1.2), distance_to_target_m=2.5, rng_seed=0)
    base.update(kw)
    return ImputationRecord(**base)


def test_render_prompt():
    out = render_prompt(_record(), "chair", 3)
    assert len(out) == 3 and len(set(out)) == 3
    for text in out:
        assert "chair" in text and "points with their right hand" in text
        assert "scene0" in text and "object 7" in text
    assert len(render_prompt(_record(), "chair", 1)) == 1
    assert len(set(render_prompt(_record(), "lamp", 6))) == 6
    with pytest.raises(ValueError):
        render_prompt(_record(), "  ")


def test_prompt_command(impute_run, tmp_path):
    _, out = impute_run
    rec_file = next(out.glob("*.records.json"))
    assert main(["prompt", "--records", str(rec_file), "--out-dir", str(tmp_path), "--label", "table"]) == 0
    files = sorted(tmp_path.glob("*.prompt.txt"))
    assert len(files) == 3 and "table" in files[0].read_text()
    assert main(["prompt", "--records", str(rec_file), "--out-dir", str(tmp_path), "--label", ""]) == 2


def test_score_command(impute_run, tmp_path, capsys):
    _, out = impute_run
    rec_file = next(out.glob("*.records.json"))
    rec = records_from_json(rec_file.read_text())[0]
    sh, ft = np.array(rec.shoulder_world), np.array(rec.fingertip_world)
    on_ray = sh + 3 * (ft - sh)
    boxes = [[*(c - 0.2), *(c + 0.2)] for c in (sh + [0, 0, 2.5], on_ray, sh - 2 * (ft - sh))]
    props = tmp_path / "p.json"
    props.write_text(json.dumps([{"record_index": 0, "proposals": boxes, "s_conf": [0.5, 0.4, 0.5],
                                  "w_score": [0, 1]}]))
    assert main(["score", "--records", str(rec_file), "--proposals", str(props)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res[0]["argmax"] == 1 and res[0]["ranking"][0] == 1
    props.write_text(json.dumps([{"record_index": 0, "proposals": boxes, "s_conf": [0.5]}]))
    assert main(["score", "--records", str(rec_file), "--proposals", str(props)]) == 3


def test_eval_command(tmp_path, capsys):
    preds = [
        {"sample_id": "a", "pred": [0, 0, 0, 0.6, 1, 1], "gt": [0, 0, 0, 1, 1, 1], "distance_m": 0.46},
        {"sample_id": "b", "pred": [0, 0, 0, 0.3, 1, 1], "gt": [0, 0, 0, 1, 1, 1], "distance_m": 3.7},
    ]
    p = tmp_path / "preds.json"
    p.write_text(json.dumps(preds))
    assert main(["eval", "--predictions", str(p), "--out", str(tmp_path / "rep.json")]) == 0
    rep = json.loads((tmp_path / "rep.json").read_text())
    assert rep["overall"] == {"iou@0.25": 1.0, "iou@0.5": 0.5}
    assert rep["buckets"]["Personal"]["n"] == 1 and rep["buckets"]["Public"]["n"] == 1
    assert "Personal" in (tmp_path / "rep.txt").read_text()
    assert "overall" in capsys.readouterr().out
    p.write_text("[")
    assert main(["eval", "--predictions", str(p)]) == 3
    p.write_text("[]")
    assert main(["eval", "--predictions", str(p)]) == 3


def test_inspect_command(dataset, tmp_path, capsys):
    root, cfg = dataset
    scene, target = cfg["targets"][0]
    ply = root / "scenes" / f"{scene}.ply"
    seg = root / "scenes" / f"{scene}.seg.json"
    rc = main(["inspect", "--ply", str(ply), "--seg", str(seg), "--voxel-size", "0.05",
               "--grid-out", str(tmp_path / "g.json"), "--target", str(target),
               "--csv", str(tmp_path / "s.csv")])
    assert rc == 0
    assert "dims=" in capsys.readouterr().out
    assert json.loads((tmp_path / "g.json").read_text())["voxel_size"] == 0.05
    rows = (tmp_path / "s.csv").read_text().strip().splitlines()
    assert all(0 <= float(v) <= 1 for v in rows[0].split(","))
    assert main(["inspect", "--ply", str(ply), "--target", "1"]) == 2
