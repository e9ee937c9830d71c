import csv
import json
import subprocess
import sys

import pytest

from mnarlogit import cli
from mnarlogit.exceptions import BootstrapFailureError, IdentificationError


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def dgp_csv(tmp_path, capsys):
    path = tmp_path / "d.csv"
    code, _, _ = run(["dgp", "--n", "4000", "--seed", "3", "--output", str(path)], capsys)
    assert code == 0
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_dgp_layout_and_reproducibility(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run(["dgp", "--n", "300", "--seed", "1", "--beta-x", "1,0.5", "--delta-x", "0,-1",
             "--laws", "normal,bernoulli:0.4", "--include-full", "--output", str(p)], capsys)
    assert a.read_bytes() == b.read_bytes()
    rows = read_rows(a)
    assert rows[0] == ["x1", "x2", "y", "s", "y_full"]
    assert len(rows) == 301
    assert all(len(r) == 5 for r in rows)
    assert any(r[2] == "" for r in rows[1:])
    assert all((r[2] == "") == (r[3] == "0") for r in rows[1:])


def test_dgp_stdout_without_missingness(capsys):
    code, out, _ = run(["dgp", "--n", "50", "--delta0", "30", "--delta-x", "0"], capsys)
    rows = list(csv.reader(out.splitlines()))
    assert code == 0 and rows[0] == ["x1", "y", "s"]
    assert all(r[1] in ("0", "1") and r[2] == "1" for r in rows[1:])


def test_fit_on_generated_data(dgp_csv, tmp_path, capsys):
    out_json = tmp_path / "fit.json"
    code, out, _ = run(["fit", "--data", str(dgp_csv), "--output", str(out_json)], capsys)
    assert code == 0
    assert "corrected" in out and "delta_y" in out
    report = json.loads(out_json.read_text())
    assert report["labels"] == ["intercept", "x1"]
    assert report["delta"]["branch"] == "rare"
    assert report["n"] == 4000
    assert "plugin_se" in {w["code"] for w in report["warnings"]}


def test_fit_json_with_bootstrap(dgp_csv, capsys):
    code, out, _ = run(["fit", "--data", str(dgp_csv), "--smoother", "parametric-logit",
                        "--bootstrap", "5", "--format", "json"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["bootstrap"]["reps"] == 5
    assert "smoother_misspecification" in {w["code"] for w in report["warnings"]}


def test_fit_complete_data(tmp_path, capsys):
    path = tmp_path / "full.csv"
    run(["dgp", "--n", "2000", "--delta0", "30", "--delta-x", "0", "--output", str(path)], capsys)
    code, out, _ = run(["fit", "--data", str(path), "--format", "json"], capsys)
    report = json.loads(out)
    assert code == 0
    assert report["corrected"]["beta"] == report["naive"]["beta"]
    assert [w["code"] for w in report["warnings"]] == ["no_missingness"]


def test_fit_missing_covariate_exits_3(dgp_csv, capsys):
    code, _, err = run(["fit", "--data", str(dgp_csv), "--covariates", "x1,age"], capsys)
    assert code == 3
    assert "age" in err


def test_fit_bad_outcome_value(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("x1,y\n0.1,1\n0.2,2\n0.3,0\n")
    code, _, err = run(["fit", "--data", str(path)], capsys)
    assert code == 3 and "error" in err


def test_identification_failure_exits_2(dgp_csv, capsys, monkeypatch):
    def boom(*a, **kw):
        exc = IdentificationError("gamma_hat = 1.3 >= 1", gamma_hat=1.3, gamma_se=0.2)
        exc.step = 2
        raise exc

    monkeypatch.setattr(cli, "fit_corrected", boom)
    code, _, err = run(["fit", "--data", str(dgp_csv)], capsys)
    assert code == 2
    assert "step 2" in err


def test_bootstrap_failure_exit_codes():
    assert cli.exit_code_for(BootstrapFailureError("x", failures={"IdentificationError": 3})) == 2
    assert cli.exit_code_for(BootstrapFailureError("x", failures={"SeparationError": 3})) == 4


def test_simulate_single_replicate(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, text, _ = run(["simulate", "--replications", "1", "--n", "2000", "--output", str(out)],
                        capsys)
    assert code == 0 and "corrected" in text
    report = json.loads(out.read_text())
    assert report["config"]["replications"] == 1
    assert report["estimators"]["naive"]["coefficients"]["x1"]["sd"] == 0.0


def test_simulate_rejects_malformed_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": 10}))
    code, _, err = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 3 and "n must be" in err
    cfg.write_text("[1, 2")
    assert run(["simulate", "--config", str(cfg)], capsys)[0] == 3


def test_simulate_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"truth": {"beta0": -3, "beta_x": [1], "delta0": 1,
                                         "delta_x": [-0.5], "delta_y": -2},
                               "n": 1500, "replications": 2, "seed": 4,
                               "smoother": "parametric-logit"}))
    code, out, _ = run(["simulate", "--config", str(cfg), "--format", "json"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["config"]["smoother"] == "parametric-logit"
    assert report["warning_counts"].get("smoother_misspecification", 0) > 0


def test_verify_grid_passes(capsys):
    code, out, _ = run(["verify"], capsys)
    assert code == 0
    assert "FAIL" not in out
    assert out.count("PASS") == 5


def test_verify_detects_injected_error(capsys):
    code, out, _ = run(["verify", "--inject-sign-error"], capsys)
    assert code == 1 and "FAIL" in out


def test_verify_single_point(capsys):
    pt = "beta0=-2,beta_x=1,delta0=0,delta_x=-1,delta_y=0.5,x=2"
    code, out, _ = run(["verify", "--point", pt], capsys)
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 2 and lines[1].endswith("PASS")
    code, out, _ = run(["verify", "--point", pt, "--point", pt.replace("x=2", "x=0")], capsys)
    assert len(out.strip().splitlines()) == 3


def test_verify_json(capsys):
    code, out, _ = run(["verify", "--format", "json"], capsys)
    report = json.loads(out)
    assert report["passed"] and report["points"] == 1215


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mnarlogit", "verify", "--point",
                           "beta0=0,beta_x=0,delta0=0,delta_x=0,delta_y=0,x=0"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert "PASS" in proc.stdout
