import csv
import hashlib
import json
import os

import pytest

from facenas.cells import DiscreteArch
from facenas.cli import main

TINY = """
[scene]
clutter = 2.0

[data]
n_train = 40
n_val = 12

[search]
width = 8
opset = 'base'
num_nodes = 3

[search_schedule]
epochs = 1
freeze_epochs = 0
batch_size = 8
seeds = (0,)
warmup_steps = 0

[model]
width = 8

[train_schedule]
epochs = 1
batch_size = 8
warmup_steps = 2

[space]
backbones = ('B0', 'B1')
stack_depths = (1, 2)
head_depths = (1, 2)
widths = (8, 16)

[supernet]
epochs = 2
warmup_epochs = 1
batch_size = 8

[evolution]
pop_size = 4
iters = 1
top_k = 2
budget_ms = 100.0
n_minival = 8
"""


def tree_digest(root):
    h = hashlib.sha256()
    for dirpath, dirnames, files in sorted(os.walk(root)):
        dirnames.sort()
        for name in sorted(files):
            path = os.path.join(dirpath, name)
            h.update(os.path.relpath(path, root).encode())
            with open(path, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


@pytest.fixture
def cfg(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return str(path)


def run(*argv):
    return main([str(a) for a in argv])


class TestErrors:
    def test_help(self, capsys):
        assert run("--help") == 0
        assert "gen-data" in capsys.readouterr().out

    def test_unknown_command_and_flag(self, capsys):
        assert run("frobnicate") == 2
        assert run("gen-data", "--n", "3", "--bogus") == 2
        assert "unrecognized arguments" in capsys.readouterr().err

    def test_bad_values(self, tmp_path, capsys):
        assert run("gen-data", "--n", "0", "--out", tmp_path / "d") == 2
        assert run("gen-data", "--n", "3", "--jobs", "0", "--out", tmp_path / "d") == 2
        assert "usage error" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[run\nseed = 1\n")
        assert run("gen-data", "--n", "2", "--config", bad) == 3
        bad.write_text("[nonsense]\nx = 1\n")
        assert run("gen-data", "--n", "2", "--config", bad) == 3
        bad.write_text("[train_schedule]\nepochz = 1\n")
        assert run("gen-data", "--n", "2", "--config", bad) == 3
        assert capsys.readouterr().err.count("bad config") == 3

    def test_missing_files(self, tmp_path, capsys):
        assert run("gen-data", "--n", "2", "--config", tmp_path / "nope.ini") == 4
        assert run("search", "--data", tmp_path / "nowhere") == 4
        assert run("eval", "--model", tmp_path / "m.ckpt", "--data", tmp_path) == 4
        assert capsys.readouterr().err.count("missing file") == 3

    def test_bad_inputs(self, tmp_path, cfg, capsys):
        data = tmp_path / "d"
        (data).mkdir()
        (data / "annotations.json").write_text('{"format": "something else"}')
        assert run("search", "--data", data, "--config", cfg) == 5
        ckpt = tmp_path / "m.ckpt"
        ckpt.write_bytes(b"not a checkpoint")
        (tmp_path / "m.ckpt.json").write_text(json.dumps({"backbone": "B0", "width": 8, "head_depth": 1,
                                                           "stack": [], "arch": None, "genome": None,
                                                           "detector": {}}))
        assert run("gen-data", "--n", "4", "--out", tmp_path / "v", "--config", cfg) == 0
        assert run("eval", "--model", ckpt, "--data", tmp_path / "v") == 5
        assert capsys.readouterr().err.count("invalid input") == 2

    def test_train_final_needs_one_source(self, tmp_path, cfg):
        assert run("gen-data", "--n", "4", "--out", tmp_path / "d", "--config", cfg) == 0
        assert run("train-final", "--data", tmp_path / "d", "--config", cfg) == 2
        assert run("train-final", "--data", tmp_path / "d", "--baseline", "--arch", "x.json", "--config", cfg) == 2


class TestCommands:
    def test_gen_data_deterministic(self, tmp_path):
        assert run("gen-data", "--n", "10", "--seed", "7", "--out", tmp_path / "a") == 0
        assert run("gen-data", "--n", "10", "--seed", "7", "--out", tmp_path / "b", "--jobs", "2") == 0
        assert run("gen-data", "--n", "10", "--seed", "8", "--out", tmp_path / "c") == 0
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b") != tree_digest(tmp_path / "c")

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FACENAS_OUTPUT_ROOT", str(tmp_path / "root"))
        assert run("gen-data", "--n", "2", "--split", "val") == 0
        assert (tmp_path / "root" / "data" / "val" / "annotations.json").exists()

    def test_search_artifacts(self, tmp_path, cfg):
        assert run("gen-data", "--n", "40", "--out", tmp_path / "d", "--config", cfg) == 0
        assert run("search", "--data", tmp_path / "d", "--seeds", "3", "--out", tmp_path / "s", "--config", cfg) == 0
        files = sorted(os.listdir(tmp_path / "s"))
        assert [f for f in files if f.endswith(".json")] == ["arch_joint.json"]
        assert len([f for f in files if f.endswith(".log.jsonl")]) == 3
        DiscreteArch.load(tmp_path / "s" / "arch_joint.json")

    def test_stage_chain(self, tmp_path, cfg, capsys):
        d, v = tmp_path / "d", tmp_path / "v"
        assert run("gen-data", "--n", "40", "--out", d, "--config", cfg) == 0
        assert run("gen-data", "--n", "12", "--split", "val", "--out", v, "--config", cfg) == 0
        inputs = (tree_digest(d), tree_digest(v))
        assert run("search", "--data", d, "--out", tmp_path / "s", "--config", cfg) == 0
        arch = tmp_path / "s" / "arch_joint.json"
        arch_digest = tree_digest(tmp_path / "s")

        assert run("train-final", "--data", d, "--arch", arch, "--out", tmp_path / "m.ckpt", "--config", cfg) == 0
        assert run("eval", "--model", tmp_path / "m.ckpt", "--data", v, "--out", tmp_path / "r.json") == 0
        report = json.loads((tmp_path / "r.json").read_text())
        assert 0 <= report["ap"] <= report["ap50"] <= 1 and set(report["subsets"]) == {"easy", "medium", "hard"}

        sn = tmp_path / "sn.ckpt"
        assert run("train-supernet", "--data", d, "--arch", arch, "--out", sn, "--config", cfg) == 0
        logged = [json.loads(l) for l in open(str(sn) + ".log.jsonl")]
        assert [r["phase"] for r in logged] == ["warmup", "width-sampling"]
        capsys.readouterr()
        assert run("evolve", "--supernet", sn, "--data", v, "--out", tmp_path / "evo", "--config", cfg) == 0
        best = capsys.readouterr().out.strip()
        rows = list(csv.DictReader(open(tmp_path / "evo" / "history.csv")))
        assert len(rows) == 8 and all(float(r["latency_ms"]) <= 100.0 for r in rows)
        assert json.loads((tmp_path / "evo" / "best.json").read_text())["genome"] == best

        assert run("bench-latency", "--supernet", sn, "--genome", best, "--runs", "11") == 0
        bench = json.loads(capsys.readouterr().out)
        assert bench[0]["genome"] == best and bench[0]["runs"] == 8
        assert run("bench-latency", "--supernet", sn, "--runs", "5") == 2
        assert run("bench-latency", "--supernet", sn, "--genome", "B9-FAE-H×1-8") == 5

        assert run("train-final", "--data", d, "--genome", best, "--supernet", sn, "--fine-tune",
                   "--out", tmp_path / "g.ckpt", "--config", cfg) == 0
        assert run("eval", "--model", tmp_path / "g.ckpt", "--data", v, "--out", tmp_path / "g.json") == 0
        card = json.loads(open(str(tmp_path / "g.ckpt") + ".json").read())
        assert card["genome"] == best
        assert (tree_digest(d), tree_digest(v)) == inputs and tree_digest(tmp_path / "s") == arch_digest

    def test_probes(self, tmp_path, cfg, capsys):
        assert run("gen-data", "--n", "16", "--out", tmp_path / "d", "--config", cfg) == 0
        assert run("gen-data", "--n", "8", "--split", "val", "--out", tmp_path / "v", "--config", cfg) == 0
        capsys.readouterr()
        assert run("probe-fa", "--train", tmp_path / "d", "--val", tmp_path / "v", "--out", tmp_path / "fa.csv",
                   "--config", cfg) == 0
        summary = json.loads(capsys.readouterr().out)
        assert {"top_down_mean_ap50", "bottom_up_mean_ap50"} <= set(summary)
        assert run("probe-fe", "--train", tmp_path / "d", "--val", tmp_path / "v", "--modules", "none,rfe",
                   "--out", tmp_path / "fe.csv", "--config", cfg) == 0
        assert len((tmp_path / "fe.csv").read_text().splitlines()) == 3

    def test_pipeline_replay(self, tmp_path, cfg):
        assert run("pipeline", "--out", tmp_path / "a", "--config", cfg, "--seed", "5") == 0
        assert run("pipeline", "--out", tmp_path / "b", "--config", tmp_path / "a" / "config.ini") == 0
        a, b = (tmp_path / "a" / "report.json").read_bytes(), (tmp_path / "b" / "report.json").read_bytes()
        assert a == b
        doc = json.loads(a)
        assert {"autofae", "baseline", "margin_ap50"} <= set(doc)
