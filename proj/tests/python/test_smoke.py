# Copyright 2026 The csdet Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import csv
import json
import math
import os
import pathlib
import subprocess

import pytest

import csdet

ROOT = pathlib.Path(__file__).resolve().parents[2]
CONFIGS = ROOT / "configs"


def test_taxonomy_and_aggregate():
    t = csdet.build_taxonomy([("a", "root"), ("b", "root"), ("c", "a"), ("d", "a")])
    assert t.root == "root"
    assert t.leaves == ["b", "c", "d"]
    assert t.parent("c") == "a"
    assert t.parent("root") is None
    p = csdet.aggregate(t, [0.3, -1.0, 2.0])
    assert math.isclose(p["root"], 1.0, abs_tol=1e-12)
    assert math.isclose(p["a"], p["c"] + p["d"], abs_tol=1e-12)


def test_invalid_taxonomy_raises():
    with pytest.raises(csdet.CsdetError):
        csdet.build_taxonomy([("a", "b"), ("b", "a")])
    with pytest.raises(ValueError):
        csdet.build_taxonomy([("a", "r1"), ("b", "r2")])


def test_load_shipped_taxonomy():
    t = csdet.load_taxonomy(str(CONFIGS / "taxonomy.tsv"))
    assert len(t.leaves) == 12
    assert t.depth == 2


def test_geometry():
    assert csdet.iou((0, 0, 10, 10), (0, 0, 10, 10)) == 1.0
    assert csdet.iou((0, 0, 10, 10), (20, 20, 30, 30)) == 0.0
    keep = csdet.nms([(0, 0, 10, 10), (1, 1, 10, 10), (20, 20, 30, 30)], [0.9, 0.8, 0.7], 0.5)
    assert keep == [0, 2]
    assert len(csdet.generate_anchors(64, 64, 8, [12, 18, 26], [0.5, 1, 2])) == 576


def test_average_precision():
    gts = [[(0, 0, 10, 10)], [(0, 0, 10, 10)]]
    dets = [(0, (0, 0, 10, 10), 0.9), (1, (30, 30, 40, 40), 0.8), (1, (0, 0, 10, 10), 0.7)]
    assert math.isclose(csdet.average_precision(dets, gts), (1.0 + 2.0 / 3.0) / 2.0)
    assert csdet.average_precision(dets, [[], []]) is None


def small_world(tmp_path):
    cfg = json.loads((CONFIGS / "world_default.json").read_text())
    cfg.update(train_box_images=16, train_image_images=16, eval_images=8)
    path = tmp_path / "world.json"
    path.write_text(json.dumps(cfg))
    return path


def test_gen_train_eval(tmp_path):
    data = tmp_path / "data"
    n_train, n_eval = csdet.gen_data(str(data), seed=3, config=str(small_world(tmp_path)))
    assert (n_train, n_eval) == (32, 8)
    tax = data / "taxonomy.tsv"
    losses = csdet.train(str(data), str(tax), str(tmp_path / "train"), seed=3,
                         config="total_epochs = 1\nlr_drop_epoch = 1\n")
    assert len(losses) > 0
    assert all(math.isfinite(x) for x in losses)
    ckpt = tmp_path / "train" / "epoch1.ckpt"
    assert ckpt.exists()
    report = csdet.evaluate(str(data), str(tax), str(ckpt), str(tmp_path / "eval"), [10, 50])
    assert set(report) >= {"mAP_all", "mAP_image_level", "per_category", "proposals"}
    with open(tmp_path / "eval" / "proposal_table.csv") as f:
        rows = list(csv.DictReader(f))
    assert [int(r["proposals"]) for r in rows] == [10, 50]


@pytest.mark.skipif("CSDET_BIN" not in os.environ, reason="CLI binary not provided")
def test_cli(tmp_path):
    exe = os.environ["CSDET_BIN"]
    ok = subprocess.run([exe, "taxonomy-check", str(CONFIGS / "taxonomy.tsv")],
                        capture_output=True, text=True)
    assert ok.returncode == 0
    assert "status ok" in ok.stdout
    bad = subprocess.run([exe, "frobnicate"], capture_output=True, text=True)
    assert bad.returncode == 2
    out = tmp_path / "data"
    gen = subprocess.run([exe, "-q", "gen-data", "--config", str(small_world(tmp_path)),
                          "--out", str(out), "--seed", "5"], capture_output=True, text=True)
    assert gen.returncode == 0, gen.stderr
    assert (out / "train" / "manifest.jsonl").exists()
