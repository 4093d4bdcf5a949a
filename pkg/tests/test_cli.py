import csv
import io
import json
import subprocess
import sys

import pytest

from fracqueue.cli import main
from fracqueue.transient import probability
from fracqueue.sim import ModelParams

TRANSIENT = ["transient", "--alpha", "0.6", "--lambda", "0.5", "--mu", "1", "--init", "2", "--t", "2",
             "--kmax", "10"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_transient_table(capsys):
    code, out, err = run(TRANSIENT, capsys)
    assert code == 0 and err == ""
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [int(r["k"]) for r in rows] == list(range(11))
    p = [float(r["probability"]) for r in rows]
    assert p[3] == probability(ModelParams(0.6, 0.5, 1.0, 2), 3, 2.0)
    assert 0.99 < sum(p) <= 1.0 + 1e-9


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    argv = ["mc-coverage", "--model", "mm1", "--grid", "0.5,50,50", "--n", "60", "--reps", "15",
            "--seed", "3", "--format", "json"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["kind"] == "mc-coverage" and doc["schema_version"] == 1
    assert doc["meta"]["seed"] == 3
    assert {r["parameter"] for r in doc["rows"]} == {"alpha", "lambda", "mu"}


def test_config_file_and_flag_override(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[fracqueue]\nformat = json\n[transient]\nalpha = 0.6\nlambda = 0.5\nmu = 1\n"
                   "init = 2\nt = 1,2\nkmax = 2\n")
    code, out, _ = run(["transient", "--config", str(cfg)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert len(doc["rows"]) == 6 and doc["meta"]["alpha"] == 0.6
    code, out, _ = run(["transient", "--config", str(cfg), "--kmax", "0", "--format", "csv"], capsys)
    assert code == 0
    assert out.splitlines()[0] == "k,t,probability,terms_used" and len(out.splitlines()) == 3


def test_unknown_config_key_is_a_data_error(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[transient]\nbogus = 1\n")
    code, out, err = run(["transient", "--config", str(cfg)], capsys)
    assert code == 1 and out == ""
    assert json.loads(err)["error"] == "data_format"


@pytest.mark.parametrize("argv", [["transient", "--bogus"], [], ["simulate", "--alpha", "0.5"],
                                  ["transient", "--alpha", "x"], ["simulate", "--alpha", "0.5", "--lambda", "1",
                                                                  "--mu", "2"]])
def test_usage_errors_exit_2(argv, capsys):
    code, out, err = run(argv, capsys)
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "usage"


def test_computation_errors_exit_1(capsys):
    code, _, err = run(["transient", "--alpha", "0.6", "--lambda", "1", "--mu", "1", "--t", "1"], capsys)
    assert code == 1
    assert set(json.loads(err)) == {"error", "message"}
    code, _, err = run(["estimate", "--input", "/nonexistent.csv"], capsys)
    assert code == 1 and json.loads(err)["error"] == "io_error"


def test_simulate_then_estimate(tmp_path, capsys):
    path = tmp_path / "path.csv"
    soj = tmp_path / "soj.csv"
    base = ["--alpha", "0.8", "--lambda", "1", "--mu", "2", "--n-events", "3000", "--seed", "5"]
    assert main(["simulate", *base, "--out", str(path)]) == 0
    assert main(["simulate", *base, "--what", "sojourns", "--out", str(soj)]) == 0
    for f in (path, soj):
        code, out, _ = run(["estimate", "--input", str(f), "--format", "json", "--ratefit", "20"], capsys)
        assert code == 0
        row = json.loads(out)["rows"][0]
        assert row["ci_alpha_low"] < 0.8 + 0.1 and row["ci_alpha_high"] > 0.8 - 0.1
        assert row["lambda_hat"] + row["mu_hat"] == row["theta_hat"]
        assert 0.0 <= row["ratefit_acceptance"] <= 1.0
    # path files store event times, so their durations differ from the sojourn file by rounding
    a = json.loads(run(["estimate", "--input", str(path), "--format", "json"], capsys)[1])["rows"][0]
    b = json.loads(run(["estimate", "--input", str(soj), "--format", "json"], capsys)[1])["rows"][0]
    assert a.keys() == b.keys()
    for key in a:
        assert a[key] == pytest.approx(b[key], rel=1e-9), key


def test_fit_financial_series(tmp_path, capsys):
    f = tmp_path / "idx.csv"
    vals = [100, 101, 99, 99, 102, 103, 101, 104, 100, 101, 102, 98]
    f.write_text("date,value\n" + "".join(f"2000-{m:02d},{v}\n" for m, v in enumerate(vals, start=1)))
    code, out, err = run(["fit", "--input", str(f), "--format", "json", "--time-unit", "1 month"], capsys)
    assert code == 0, err
    doc = json.loads(out)
    row = doc["rows"][0]
    assert (row["observations"], row["positive_changes"], row["negative_changes"], row["zero_changes"]) == (
        12, 6, 4, 1)
    assert row["n"] == 10 and row["n_births"] == 6
    assert doc["meta"]["time_unit"] == "1 month"
    assert "alpha_hat" in row and "ci_mu_high" in row


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "fracqueue.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("fracqueue ")
