import json

import numpy as np
import pytest

from vgod.cli import main, read_scores


def synth(path, n=200, d=6, seed=0):
    assert main(["synth", "--out", str(path), "--n", str(n), "--communities", "2", "--p-in", "0.06",
                 "--p-out", "0.004", "--attr-dim", str(d), "--seed", str(seed)]) == 0


def test_pipeline(tmp_path, capsys):
    synth(tmp_path / "g")
    assert main(["inject", "--data", str(tmp_path / "g"), "--out", str(tmp_path / "inj"),
                 "--p", "2", "--q", "5", "--k", "20", "--seed", "1"]) == 0
    d = str(tmp_path / "inj")
    assert main(["train-vbm", "--data", d, "--epochs", "2", "--hidden", "8", "--self-loop", "true",
                 "--out", str(tmp_path / "v.ckpt")]) == 0
    assert main(["train-arm", "--data", d, "--epochs", "2", "--hidden", "8", "--gnn", "gcn",
                 "--out", str(tmp_path / "a.ckpt")]) == 0
    assert main(["score", "--data", d, "--vbm", str(tmp_path / "v.ckpt"), "--arm", str(tmp_path / "a.ckpt"),
                 "--out", str(tmp_path / "s.csv")]) == 0
    s = read_scores(tmp_path / "s.csv")
    assert s.shape == (200,) and np.all(np.isfinite(s))
    assert main(["eval", "--data", d, "--scores", str(tmp_path / "s.csv"), "--out", str(tmp_path / "m.json")]) == 0
    m = json.loads((tmp_path / "m.json").read_text())
    assert 0 <= m["auc"] <= 1 and m["aucgap"] >= 1


def test_audit_outputs(tmp_path, capsys):
    assert main(["audit", "--estimate", "--n", "200", "--d", "8", "--trials", "5000"]) == 0
    assert json.loads(capsys.readouterr().out)["probability"] > 0.5
    synth(tmp_path / "g", n=150)
    assert main(["audit", "--data", str(tmp_path / "g"), "--ks", "1,10", "--distances", "euclidean",
                 "--count", "10"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "k,distance,auc" and len(lines) == 3


def test_run_and_bench(tmp_path, capsys):
    cfg = {"dataset": {"synth": {"n": 200, "communities": 2, "p_in": 0.06, "p_out": 0.004,
                                 "attr_dim": 6, "attr_sep": 3.0, "seed": 0}},
           "injection": {"kind": "standard", "p": 2, "q": 5, "k": 20},
           "model": "degnorm", "seeds": [0, 1]}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["run", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "r")]) == 0
    doc = json.loads((tmp_path / "r" / "report.json").read_text())
    assert len(doc["rows"]) == 2 and doc["config"]["model"]["name"] == "degnorm"
    assert main(["bench", "--sizes", "300", "--hidden", "8", "--repeats", "1"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "n,m,seconds"


@pytest.mark.parametrize("argv", [
    ["run", "--config", "/nonexistent.json"],
    ["frobnicate"],
    ["inject", "--data", "/nonexistent", "--out", "/tmp/x"],
    ["train-vbm", "--data", "/nonexistent", "--out", "/tmp/x"],
])
def test_config_errors_exit_2(argv):
    assert main(argv) == 2


def test_bad_preset_exit_2(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"preset": "mars-unod"}))
    assert main(["run", "--config", str(tmp_path / "c.json")]) == 2


def test_runtime_error_exit_3(tmp_path):
    synth(tmp_path / "a", d=6)
    synth(tmp_path / "b", d=7)
    assert main(["train-arm", "--data", str(tmp_path / "a"), "--epochs", "1", "--hidden", "4",
                 "--out", str(tmp_path / "a.ckpt")]) == 0
    assert main(["score", "--data", str(tmp_path / "b"), "--arm", str(tmp_path / "a.ckpt")]) == 3
    (tmp_path / "junk.ckpt").write_bytes(b"\0" * 32)
    assert main(["score", "--data", str(tmp_path / "a"), "--vbm", str(tmp_path / "junk.ckpt")]) == 3
