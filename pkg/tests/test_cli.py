"""End-to-end tests of the ``pointimpact`` command line."""

import json
import subprocess
import sys

import pytest

from pointimpact.cli import main
from pointimpact.fbm import TrajectorySet
from pointimpact.harness import read_report


@pytest.fixture
def traj(tmp_path):
    p = tmp_path / "paths.csv"
    assert main(["simulate-fbm", "--hurst", "0.5", "--n", "25", "--grid-size", "51",
                 "--seed", "3", "--out", str(p)]) == 0
    return p


@pytest.fixture
def data(tmp_path, traj):
    p = tmp_path / "data.csv"
    assert main(["ingest", "--trajectories", str(traj), "--theta0", "0.5", "--sigma", "0.2",
                 "--seed", "1", "--out", str(p), "--quiet"]) == 0
    return p


def test_simulate_fbm_csv_and_json(tmp_path, traj):
    ts = TrajectorySet.from_csv(traj)
    assert ts.values.shape == (25, 51)
    pj = tmp_path / "paths.json"
    assert main(["simulate-fbm", "--hurst", "0.5", "--n", "25", "--grid-size", "51",
                 "--seed", "3", "--format", "json", "--out", str(pj)]) == 0
    assert (TrajectorySet.from_json(pj).values == ts.values).all()


def test_ingest_writes_truth(data):
    truth = json.loads(data.with_name(data.name + ".truth.json").read_text())["truth"]
    assert truth["theta0"] == 0.5 and truth["sigma"] == 0.2


@pytest.mark.parametrize("fmt", ["json", "csv"])
def test_fit(capsys, data, fmt):
    assert main(["fit", "--data", str(data), "--format", fmt]) == 0
    out = capsys.readouterr().out
    if fmt == "json":
        assert 0.0 <= json.loads(out)["theta_hat"] <= 1.0
    else:
        assert out.startswith("theta_hat,")


@pytest.mark.parametrize("cmd", ["ci-residual", "ci-pairs"])
def test_bootstrap_commands(tmp_path, capsys, data, cmd):
    dist, hist = tmp_path / "dist.csv", tmp_path / "hist.csv"
    argv = [cmd, "--data", str(data), "-B", "200", "--seed", "4", "--dist-out", str(dist),
            "--hist-out", str(hist), "--bins", "7"]
    assert main(argv) == 0
    ci = json.loads(capsys.readouterr().out)
    assert 0.0 <= ci["lo"] <= ci["hi"] <= 1.0 and ci["level"] == 0.95
    assert len(dist.read_text().splitlines()) == 201
    assert len(hist.read_text().splitlines()) == 8


def test_bootstrap_from_trajectories_and_responses(tmp_path, capsys, traj):
    y = tmp_path / "y.csv"
    y.write_text("\n".join(str(0.1 * i) for i in range(25)) + "\n")
    assert main(["ci-residual", "--trajectories", str(traj), "--responses", str(y), "-B", "50",
                 "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("lo,hi,level,method,width\n")


def test_ci_wald(capsys, data):
    assert main(["ci-wald", "--data", str(data), "--hurst", "0.5"]) == 0
    assert json.loads(capsys.readouterr().out)["method"] == "Wald"


def test_quantile_table(tmp_path, capsys):
    assert main(["quantile-table", "--hurst", "1.0", "--alpha", "0.05", "--draws", "500"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert rows[0]["regime"] == "CorrectSpec" and rows[0]["alpha"] == 0.05
    out = tmp_path / "q.csv"
    assert main(["quantile-table", "--hurst", "1.0", "--alpha", "0.05", "--draws", "500",
                 "--format", "csv", "--out", str(out)]) == 0
    assert out.read_text().startswith("regime,H,alpha,z,draws,seed\n")


def test_coverage_experiment(tmp_path):
    cfg = tmp_path / "cell.cfg"
    cfg.write_text("n = 15\nouter_reps = 4\nboot_B = 40\n")
    out = tmp_path / "rep.csv"
    assert main(["coverage-experiment", "--config", str(cfg), "--sigma", "0.2", "--seed", "9",
                 "--out", str(out), "--quiet"]) == 0
    rows = read_report(out)
    assert [r["method"] for r in rows] == ["WaldH", "ResidualBoot", "PairsBoot"]
    assert rows[0]["sigma"] == 0.2 and rows[0]["seed"] == 9 and rows[0]["n"] == 15
    assert "seed = 9" in (tmp_path / "rep.csv.config").read_text()


def test_two_sample(capsys):
    assert main(["two-sample", "--n1", "30", "--n2", "30", "--seed", "2"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["theta0"] == 0.5 and rec["degenerate"] is False


def test_error_record(capsys, tmp_path):
    assert main(["fit", "--data", str(tmp_path / "absent.csv")]) == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["command"] == "fit" and err["error"] == "FileNotFoundError"


@pytest.mark.parametrize(
    "argv",
    [["fit"], ["simulate-fbm", "--hurst", "0.5"], ["simulate-fbm", "--hurst", "1.5", "--out", "x.csv"],
     ["coverage-experiment", "--n", "2", "--quiet"]],
)
def test_nonzero_exit(capsys, argv):
    assert main(argv) == 1
    assert "error" in json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_outputs_deterministic(tmp_path, data):
    outs = []
    for k in range(2):
        out = tmp_path / f"d{k}.csv"
        assert main(["ci-pairs", "--data", str(data), "-B", "100", "--seed", "5", "--out", str(out),
                     "--dist-out", str(tmp_path / f"dist{k}.csv")]) == 0
        outs.append((out.read_bytes(), (tmp_path / f"dist{k}.csv").read_bytes()))
    assert outs[0] == outs[1]


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pointimpact.cli", "fit", "--data", str(tmp_path / "no.csv")],
                       capture_output=True, text=True)
    assert r.returncode == 1 and json.loads(r.stderr)["command"] == "fit"
