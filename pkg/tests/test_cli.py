import json
import subprocess
import sys

import numpy as np
import pytest

from termctl.cli import dumps, main
from termctl.harness import ar1_reference_regime
from termctl.model import ChainOutput


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def regime_file(tmp_path):
    p = tmp_path / "regime.json"
    ar1_reference_regime(2).to_json(p)
    return str(p)


def test_plan(capsys, regime_file):
    code, out, _ = run(capsys, "plan", "--regime", regime_file, "--epsilon", "0.05", "--bounds")
    data = json.loads(out)
    assert code == 0 and data["p0"] == 40.0 and "bounds" in data
    assert list(data)[:3] == ["p0", "psi_N", "batch_exponent"]


def test_unknown_flag_is_usage_error(capsys, regime_file):
    code, out, err = run(capsys, "plan", "--regime", regime_file, "--nope")
    assert code == 1 and out == "" and "unrecognized" in err
    assert run(capsys)[0] == 1


def test_invalid_regime_is_exit_2(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"drift": {"kind": "geometric", "lambda": 1.2, "b": 1,
                                       "upsilon_C": 1},
                             "minorisation": {"alpha": 0.5}, "moments": {"p": 4, "epsilon": 0.25}}))
    code, out, _ = run(capsys, "plan", "--regime", str(p))
    assert code == 2 and json.loads(out)["error"] == "PRECONDITION"


def test_analyze_one_row(capsys, tmp_path):
    p = tmp_path / "one.csv"
    ChainOutput([[1.0]]).to_csv(p)
    code, out, _ = run(capsys, "analyze", "--input", str(p), "--p0", "4")
    assert code == 2 and json.loads(out)["error"] == "TOO_FEW_BATCHES"


def test_analyze(capsys, tmp_path):
    p = tmp_path / "c.csv"
    ChainOutput(np.random.default_rng(0).standard_normal((5000, 2))).to_csv(p)
    code, out, _ = run(capsys, "analyze", "--input", str(p), "--batch-mode", "table", "--p0", "4")
    data = json.loads(out)
    assert code == 0 and set(data) >= {"sigma_hat", "gamma_hat", "ess", "batch_plan", "spectral"}
    assert data["batch_plan"]["batch_size"] == int(np.ceil(5000 ** 0.75))
    code, out, _ = run(capsys, "analyze", "--input", str(p), "--batch-mode", "user",
                       "--batch-size", "50", "--jitter", "0.1")
    assert code == 0 and json.loads(out)["jitter"] == 0.1
    assert run(capsys, "analyze", "--input", str(p))[0] == 1


def test_analyze_singular(capsys, tmp_path):
    p = tmp_path / "c.csv"
    v = np.zeros((400, 2))
    v[:, 0] = np.arange(400) % 7
    ChainOutput(v).to_csv(p)
    code, out, _ = run(capsys, "analyze", "--input", str(p), "--p0", "4")
    assert code == 2 and json.loads(out)["error"] == "SINGULAR_SIGMA"


def test_run_fvsr_and_trace(capsys, tmp_path):
    tr = tmp_path / "trace.csv"
    code, out, _ = run(capsys, "run-fvsr", "--epsilon", "0.3", "--chain", "ar1", "--d", "2",
                       "--seed", "4", "--t-star", "300", "--trace", str(tr))
    data = json.loads(out)
    assert code == 0 and data["status"] == "TERMINATED"
    assert tr.read_text().splitlines()[0] == "t,vol,vol_root,ess,batch_size"
    code, out, _ = run(capsys, "run-fvsr", "--epsilon", "0.05", "--d", "3", "--max-T", "1000")
    assert code == 2 and json.loads(out)["error"] == "NOT_TERMINATED"


def test_simulate_with_regen(capsys, tmp_path):
    traj, regen = tmp_path / "t.csv", tmp_path / "r.csv"
    code, out, _ = run(capsys, "simulate", "--kernel", "ar1-split", "--T", "2000", "--seed", "7",
                       "--out", str(traj), "--regen", str(regen))
    assert code == 0
    rows = regen.read_text().splitlines()
    assert rows[0] == "k,R_k,cycle_len" and len(rows) - 1 == json.loads(out)["regenerations"]
    assert ChainOutput.from_csv(traj).T == 2000
    assert run(capsys, "simulate", "--kernel", "ar1", "--T", "10", "--regen", "x.csv")[0] == 1


def test_experiment_command(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"reps": 1, "T": 3000}))
    code, out, _ = run(capsys, "experiment", "bounds", "--config", str(cfg), "--out",
                       str(tmp_path / "res"), "--seed", "2")
    assert code == 0 and (tmp_path / "res" / "results.csv").exists()
    assert json.loads(out)["config"]["seed"] == 2
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run(capsys, "experiment", "bounds", "--config", str(cfg))[0] == 1


def test_dumps_format():
    s = dumps({"b": 0.1, "a": [1, float("inf"), float("nan")], "c": np.float64(2.0), "d": None})
    assert s == '{"b":0.10000000000000001,"a":[1,"inf","nan"],"c":2.0,"d":null}'


def test_module_entry_point_is_deterministic(tmp_path, regime_file):
    cmd = [sys.executable, "-m", "termctl", "run-fvsr", "--epsilon", "0.3", "--d", "2",
           "--seed", "11", "--t-star", "500"]
    a = subprocess.run(cmd, capture_output=True, check=True).stdout
    b = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert a == b and a
