import json
import subprocess
import sys

import numpy as np
import pytest

from tewm.cli import run
from tewm.data import TimeSeries, build_lagged, load_csv, write_csv
from tewm.multiperiod import learn_two_period
from tewm.propensity import Constant, fit_logit
from tewm.rules import Quadrant
from tewm.search import learn_quadrant_2d
from tewm.simulate import DgpSpec, QuadrantAr, simulate
from tewm.welfare import welfare_unconditional


def _run(argv, capsys):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def _error(err):
    return json.loads(err.strip().splitlines()[-1])


@pytest.fixture
def sample(tmp_path, capsys):
    path = tmp_path / "a.csv"
    code, rep, _ = _run(["simulate", "--n", 300, "--seed", 42, "--out", path], capsys)
    assert code == 0
    return path


def test_simulate_matches_library(sample):
    assert load_csv(sample) == simulate(DgpSpec(QuadrantAr(), T=301, seed=42))


def test_learn_matches_library(sample, capsys):
    code, rep, _ = _run(["learn", "--in", sample, "--class", "quadrant", "--propensity", "constant:0.5"], capsys)
    assert code == 0
    rows = build_lagged(load_csv(sample), "y_lag,z1_lag")
    lib = learn_quadrant_2d(rows, Constant(0.5), "y_lag,z1_lag").to_dict()
    assert rep["result"]["value"] == lib["value"]
    assert rep["result"]["thresholds"] == lib["thresholds"]
    assert rep["result"]["signs"] == lib["signs"]
    assert rep["schema"] == 1 and rep["seed"] is None and "version" in rep


def test_evaluate_with_learned_rule(sample, tmp_path, capsys):
    out = tmp_path / "learn.json"
    assert _run(["learn", "--in", sample, "--out", out], capsys)[0] == 0
    code, rep, _ = _run(["evaluate", "--in", sample, "--rule", out], capsys)
    assert code == 0
    assert rep["result"]["value"] == json.loads(out.read_text())["result"]["value"]
    code, rep2, _ = _run(["evaluate", "--in", sample, "--signs=-1,-1", "--thresholds", "2.5,0.52"], capsys)
    rows = build_lagged(load_csv(sample), "y_lag,z1_lag")
    lib = welfare_unconditional(rows, Quadrant((-1, -1), (2.5, 0.52), ("y_lag", "z1_lag")), Constant(0.5))
    assert rep2["result"]["value"] == lib.value


def test_fit_propensity_logit(sample, capsys):
    code, rep, _ = _run(["fit-propensity", "--in", sample, "--pcols", "y_lag,z1_lag"], capsys)
    assert code == 0
    lib = fit_logit(build_lagged(load_csv(sample), "y_lag,z1_lag"))
    assert rep["model"]["alpha"] == lib.intercept
    assert rep["model"]["beta"] == lib.coefs.tolist()


def test_two_period(tmp_path, capsys):
    path = tmp_path / "m.csv"
    assert _run(["simulate", "--dgp", "markov-switch", "--n", 200, "--seed", 3, "--out", path], capsys)[0] == 0
    code, rep, _ = _run(["learn", "--in", path, "--class", "two-period", "--state", 1, "--propensity", "logit"], capsys)
    assert code == 0
    rows = build_lagged(load_csv(path), "w_lag")
    lib = learn_two_period(rows, fit_logit(rows), 1)
    assert rep["result"]["value"] == lib.value_total


def test_missing_input_is_usage_error(capsys):
    code, _, err = _run(["learn", "--class", "quadrant"], capsys)
    assert code == 1 and _error(err)["error"] == "UsageError"


def test_missing_seed(tmp_path, capsys):
    code, _, err = _run(["simulate", "--out", tmp_path / "x.csv"], capsys)
    assert code == 1 and _error(err)["error"] == "UsageError"
    code, _, err = _run(["montecarlo", "--reps", 2, "--sizes", 20], capsys)
    assert code == 1 and _error(err)["error"] == "UsageError"


def test_bad_flag_is_usage_error(capsys):
    code, _, err = _run(["learn", "--no-such-flag"], capsys)
    assert code == 1 and _error(err)["error"] == "UsageError"


def test_validation_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("t,y,w\n0,1,1\n1,2,3\n")
    code, _, err = _run(["learn", "--in", p, "--cols", "y_lag,w_lag"], capsys)
    assert code == 1 and _error(err)["error"] == "NonBinaryTreatment"


def test_overlap_violation_exit_code(tmp_path, capsys):
    rng = np.random.default_rng(0)
    T = 400
    z = rng.normal(size=(T, 1))
    w = np.zeros(T, dtype=int)
    w[1:] = (rng.random(T - 1) < 1 / (1 + np.exp(-6 * z[:-1, 0]))).astype(int)
    p = tmp_path / "o.csv"
    write_csv(TimeSeries(rng.normal(size=T), w, z), p)
    argv = ["learn", "--in", p, "--cols", "y_lag,z1_lag", "--propensity", "logit"]
    code, _, err = _run(argv, capsys)
    assert code == 2
    e = _error(err)
    assert e["error"] == "OverlapViolation" and "t=" in e["detail"]
    code, rep, _ = _run(argv + ["--allow-overlap-violations"], capsys)
    assert code == 0 and rep["overlap"]["violating_indices"]


def test_config_file_and_flag_override(sample, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# learning run\nin={sample}\ncols=y_lag,z1_lag\npropensity=constant:0.4\n")
    code, rep, _ = _run(["learn", "--config", cfg], capsys)
    assert code == 0 and rep["config"]["propensity"] == "constant:0.4"
    code, rep2, _ = _run(["learn", "--config", cfg, "--propensity", "constant:0.5"], capsys)
    assert rep2["config"]["propensity"] == "constant:0.5"
    assert rep2["result"]["value"] != rep["result"]["value"]


def test_report_reruns_from_embedded_config(sample, tmp_path, capsys):
    first = tmp_path / "first.json"
    code, rep, _ = _run(["learn", "--in", sample, "--objective", "kernel:x=1/0,h=1.5", "--report", first], capsys)
    assert code == 0
    code, again, _ = _run(["learn", "--config", first], capsys)
    assert code == 0
    assert again["result"] == rep["result"]


def test_montecarlo_command(tmp_path, capsys):
    out = tmp_path / "mc.json"
    table = tmp_path / "mc.txt"
    code, rep, _ = _run(["montecarlo", "--seed", 7, "--sizes", "20,30,40", "--reps", 3, "--out", out, "--table", table], capsys)
    assert code == 0
    assert len(rep["result"]["rows"]) == 3 and "rate" in rep
    assert "mean_B1" in table.read_text()
    code, rep2, _ = _run(["montecarlo", "--config", out], capsys)
    assert rep2["result"] == rep["result"]


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tewm", "learn"], capture_output=True, text=True)
    assert proc.returncode == 1
    assert json.loads(proc.stderr.strip())["error"] == "UsageError"
