import json
import subprocess
import sys

import pytest


def run_cli(*args, check=True):
    proc = subprocess.run([sys.executable, "-m", "dimergas", *args],
                          capture_output=True, text=True)
    if check and proc.returncode != 0:
        raise AssertionError(f"CLI failed: {proc.stderr}")
    return proc


def test_free_energy_envelope_and_determinism():
    a = run_cli("free-energy", "--model", "flipped",
                "--weights", "1,0.9,0.9,1", "--tol", "1e-8")
    b = run_cli("free-energy", "--model", "flipped",
                "--weights", "1,0.9,0.9,1", "--tol", "1e-8")
    da, db = json.loads(a.stdout), json.loads(b.stdout)
    assert "value" in da["result"] and "error_estimate" in da["result"]
    # identical after dropping the timestamped meta field
    da.pop("meta")
    db.pop("meta")
    assert json.dumps(da, sort_keys=True) == json.dumps(db, sort_keys=True)
    # floats serialized as decimal strings
    assert isinstance(da["result"]["value"], str)
    assert float(da["result"]["value"]) == pytest.approx(1.0754953141686332)


def test_edge_prob_matches_library():
    from dimergas.lattice import DriftedWeights, Edge
    from dimergas.spectral import local_stats

    proc = run_cli("edge-prob", "--model", "drifted", "--weights",
                   "1,0.9,0.9,1", "--edge", "0,0:1,0")
    value = float(json.loads(proc.stdout)["result"]["probability"])
    expected = local_stats([Edge.between((0, 0), (1, 0))],
                           DriftedWeights(1, 0.9, 0.9, 1))
    assert value == pytest.approx(expected, abs=1e-9)


def test_wick_defect_rejects_touching_intervals():
    proc = run_cli("wick-defect", "--lambda", "1,0",
                   "--intervals", "0,1:1,2:2,3:3,4", "--tol", "1e-6",
                   check=False)
    assert proc.returncode != 0
    err = json.loads(proc.stderr)
    assert "overlap" in err["error"]


def test_wick_defect_report():
    proc = run_cli("wick-defect", "--lambda", "1,0",
                   "--intervals", "0,1:2,3:4,5:6,7", "--tol", "1e-6")
    result = json.loads(proc.stdout)["result"]
    assert result["certified"] is True
    assert float(result["value"]) == pytest.approx(9.369269694186e-06, rel=1e-6)


def test_inv_kasteleyn_subcommand():
    proc = run_cli("inv-kasteleyn", "--model", "flipped", "--weights",
                   "1,2,3,4", "--b", "0", "--w", "0", "--x", "0", "--y", "0")
    result = json.loads(proc.stdout)["result"]
    from dimergas.lattice import FlippedWeights, VertexClass
    from dimergas.spectral import inv_kasteleyn
    expected = inv_kasteleyn(FlippedWeights(1, 2, 3, 4), VertexClass.B0,
                             VertexClass.W0, 0, 0).value
    assert float(result["value"]) == pytest.approx(expected, abs=1e-9)


def test_green_csv():
    proc = run_cli("green", "--lambda", "1,0", "--kind", "massive",
                   "--grid", "1:2:3,0:1:2", "--format", "csv")
    lines = proc.stdout.strip().splitlines()
    assert lines[0] == "x,y,value"
    assert len(lines) == 1 + 6


def test_sample_reproducible():
    args = ("sample", "--width", "6", "--height", "6", "--weights",
            "1,1,2,2", "--n", "50", "--seed", "9", "--stream", "1")
    a = run_cli(*args)
    b = run_cli(*args)
    da, db = json.loads(a.stdout), json.loads(b.stdout)
    da.pop("meta")
    db.pop("meta")
    assert da == db
    freq = {k: float(v) for k, v in da["result"]["center_arrow_freq"].items()}
    assert sum(freq.values()) == pytest.approx(1.0)


def test_sample_ndjson():
    proc = run_cli("sample", "--width", "4", "--height", "4", "--n", "10",
                   "--seed", "3", "--format", "ndjson")
    rows = [json.loads(line) for line in proc.stdout.strip().splitlines()]
    assert len(rows) == 10
    assert set(rows[0]) == {"sample", "center_arrow"}


def test_config_file_defaults(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"model": "flipped", "weights": "1,0.9,0.9,1",
                               "tol": 1e-8}))
    proc = run_cli("free-energy", "--config", str(cfg))
    assert float(json.loads(proc.stdout)["result"]["value"]) == pytest.approx(
        1.0754953141686332)


def test_config_file_toml(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text('model = "flipped"\nweights = "1,0.9,0.9,1"\n')
    proc = run_cli("free-energy", "--config", str(cfg))
    assert float(json.loads(proc.stdout)["result"]["value"]) == pytest.approx(
        1.0754953141686332)


def test_validate_subcommand_group():
    proc = run_cli("validate", "spectral", "--seed", "42")
    assert "criterion  3" in proc.stdout
    assert "ALL PASS" in proc.stdout


def test_bad_weights_rejected():
    proc = run_cli("edge-prob", "--model", "flipped", "--weights", "1,-1,1,1",
                   "--edge", "0,0:1,0", check=False)
    assert proc.returncode != 0
    assert "error" in json.loads(proc.stderr)
