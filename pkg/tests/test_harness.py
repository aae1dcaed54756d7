"""Tests for the coverage harness, ingestion and report emission."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pointimpact.bootstrap import BootstrapConfig, percentile_ci, residual_bootstrap
from pointimpact.estimation import fit_point_impact
from pointimpact.fbm import FbmSpec, Grid, sample_fbm_cholesky
from pointimpact.harness import (
    REPORT_FIELDS,
    ExperimentConfig,
    ResultRow,
    _scenario_data,
    emit_histogram_data,
    emit_report,
    ingest,
    read_report,
    run_coverage_experiment,
    synthesize_rough_trajectories,
)
from pointimpact.limit_dist import QuantileTable
from pointimpact._rng import substream

SMALL = dict(n=15, outer_reps=6, boot_B=60)


# config -------------------------------------------------------------------------


def test_config_round_trip():
    cfg = ExperimentConfig(n=40, sigma=0.5, H=0.7, methods=("WaldH", "PairsBoot"), f="ind:0.2:0.4")
    assert ExperimentConfig.loads(cfg.dumps()) == cfg


def test_config_file_comments(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# table cell\nn = 40\nsigma = 0.5  # noise\n\nmethods = ResidualBoot\n")
    cfg = ExperimentConfig.from_file(p)
    assert cfg.n == 40 and cfg.sigma == 0.5 and cfg.methods == ("ResidualBoot",)


@pytest.mark.parametrize("text", ["n 40", "bogus = 1", "n = forty"])
def test_config_parse_errors(text):
    with pytest.raises(ValueError):
        ExperimentConfig.loads(text)


@pytest.mark.parametrize(
    "kw", [dict(grid_size=2), dict(outer_reps=0), dict(level=1.0), dict(methods="Jackknife"),
           dict(scenario="Other"), dict(sampler="wavelet")],
)
def test_config_guards(kw):
    with pytest.raises(ValueError):
        ExperimentConfig(**kw)


# experiments ------------------------------------------------------------------------


def test_noiseless_full_coverage_zero_width():
    rows = run_coverage_experiment(ExperimentConfig(sigma=0.0, **SMALL))
    assert [r.method for r in rows] == ["WaldH", "ResidualBoot", "PairsBoot"]
    for r in rows:
        assert r.coverage == 1.0 and r.mc_standard_error == 0.0
    by = {r.method: r for r in rows}
    assert by["WaldH"].avg_width == 0.0 and by["ResidualBoot"].avg_width == 0.0


def test_single_replicate_trace():
    cfg = ExperimentConfig(outer_reps=1, boot_B=200, methods=("ResidualBoot",), seed=5)
    rows, recs = run_coverage_experiment(cfg, return_replicates=True)
    grid = Grid.linspace(0, 1, 101)
    data, target = _scenario_data(cfg, grid, 0)
    fit = fit_point_impact(data)
    seed = int(substream(5, 0, "ResidualBoot").integers(0, 2**63 - 1))
    ci = percentile_ci(residual_bootstrap(data, fit, BootstrapConfig(200, "Residual", seed)))
    assert rows[0].coverage == float(ci.contains(0.5))
    assert rows[0].avg_width == ci.width
    assert recs[0].theta_hat == fit.theta_hat and target == 0.5


def test_mc_standard_error_identity():
    rows = run_coverage_experiment(ExperimentConfig(**SMALL, seed=3))
    for r in rows:
        assert r.mc_standard_error == math.sqrt(r.coverage * (1 - r.coverage) / 6)
        assert 0 <= r.coverage <= 1 and r.avg_width >= 0


def test_method_isolation():
    full = run_coverage_experiment(ExperimentConfig(**SMALL, seed=8))
    part = run_coverage_experiment(ExperimentConfig(**SMALL, seed=8, methods=("ResidualBoot", "WaldH")))
    a = {r.method: (r.coverage, r.avg_width) for r in full}
    b = {r.method: (r.coverage, r.avg_width) for r in part}
    assert a["WaldH"] == b["WaldH"] and a["ResidualBoot"] == b["ResidualBoot"]


def test_workers_identical():
    cfg = ExperimentConfig(**SMALL, seed=11)
    _, r1 = run_coverage_experiment(cfg, return_replicates=True)
    _, r2 = run_coverage_experiment(cfg, workers=2, return_replicates=True)
    assert [(r.index, r.covered, r.width) for r in r1] == [(r.index, r.covered, r.width) for r in r2]


def test_wald_needs_table_entry():
    with pytest.raises(KeyError):
        run_coverage_experiment(ExperimentConfig(**SMALL), table=QuantileTable())


@pytest.mark.parametrize("scenario, f", [("PartialMisspec", "0.5"), ("CompleteMisspec", "1")])
def test_misspecified_scenarios_run(scenario, f):
    rows = run_coverage_experiment(ExperimentConfig(**SMALL, scenario=scenario, f=f,
                                                    methods=("ResidualBoot",)))
    assert rows[0].config.scenario == scenario


def test_progress_callback():
    seen = []
    run_coverage_experiment(ExperimentConfig(**SMALL, methods=("WaldH",)), progress=lambda i, n: seen.append((i, n)))
    assert seen[-1] == (6, 6) and len(seen) == 6


# reports ------------------------------------------------------------------------------


def _rows():
    cfg = ExperimentConfig(**SMALL)
    return [ResultRow(cfg, "WaldH", 0.875, 0.0912, 0.0135), ResultRow(cfg, "PairsBoot", 1.0, 0.25, 0.0)]


def test_empty_report_header_only(tmp_path):
    emit_report([], "csv", tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == ",".join(REPORT_FIELDS) + "\n"


@pytest.mark.parametrize("fmt, name", [("csv", "r.csv"), ("json", "r.json")])
def test_report_round_trip(tmp_path, fmt, name):
    rows = _rows()
    emit_report(rows, fmt, tmp_path / name)
    assert read_report(tmp_path / name) == [r.record() for r in rows]


def test_json_report_embeds_config(tmp_path):
    emit_report(_rows(), "json", tmp_path / "r.json")
    payload = json.loads((tmp_path / "r.json").read_text())
    assert payload["config"]["n"] == 15 and payload["config"]["methods"] == ["WaldH", "ResidualBoot", "PairsBoot"]


def test_report_bad_format(tmp_path):
    with pytest.raises(ValueError):
        emit_report(_rows(), "xml", tmp_path / "r.xml")


def test_report_unwritable(tmp_path):
    with pytest.raises(OSError):
        emit_report(_rows(), "csv", tmp_path / "missing" / "r.csv")


# histograms -----------------------------------------------------------------------------


def _hist(path):
    lines = path.read_text().splitlines()
    assert lines[0] == "bin_left,bin_right,count"
    return [tuple(map(float, line.split(","))) for line in lines[1:]]


def test_histogram_single_value(tmp_path):
    emit_histogram_data([0.5] * 7, 5, tmp_path / "h.csv")
    counts = [c for _, _, c in _hist(tmp_path / "h.csv")]
    assert sum(c > 0 for c in counts) == 1 and sum(counts) == 7


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200), st.integers(1, 40))
def test_histogram_counts_sum(tmp_path_factory, values, bins):
    p = tmp_path_factory.mktemp("h") / "h.csv"
    emit_histogram_data(values, bins, p)
    rows = _hist(p)
    assert len(rows) == bins and sum(c for _, _, c in rows) == len(values)


def test_histogram_uniform(tmp_path):
    v = np.random.default_rng(0).uniform(0, 1, 100_000)
    emit_histogram_data(v, 10, tmp_path / "h.csv")
    for _, _, c in _hist(tmp_path / "h.csv"):
        assert abs(c - 10_000) <= 500


def test_histogram_guards(tmp_path):
    with pytest.raises(ValueError):
        emit_histogram_data([1.0], 0, tmp_path / "h.csv")
    with pytest.raises(ValueError):
        emit_histogram_data([], 3, tmp_path / "h.csv")


# ingestion ---------------------------------------------------------------------------------


def _write_paths(tmp_path, n, m=11, seed=0):
    ts = sample_fbm_cholesky(FbmSpec(0.5, Grid.linspace(0, 1, m)), n, seed)
    p = tmp_path / "traj.csv"
    ts.to_csv(p, ids=[f"s{i}" for i in range(n)])
    return ts, p


def test_ingest_with_responses(tmp_path):
    ts, p = _write_paths(tmp_path, 6)
    (tmp_path / "y.csv").write_text("y\n" + "\n".join(str(v) for v in range(6)) + "\n")
    ds = ingest(p, tmp_path / "y.csv")
    assert ds.scenario == "External" and ds.truth["ids"][0] == "s0"
    np.testing.assert_array_equal(ds.X, ts.values)
    np.testing.assert_array_equal(ds.y, np.arange(6.0))


def test_ingest_synthesized(tmp_path):
    ts, p = _write_paths(tmp_path, 6)
    ds = ingest(p, theta0=0.5, sigma=0.0)
    np.testing.assert_array_equal(ds.y, ts.values[:, 5])
    assert ds.truth["synthesized"] and ds.truth["theta0"] == 0.5


def test_ingest_two_subjects_then_fit_fails(tmp_path):
    _, p = _write_paths(tmp_path, 2)
    ds = ingest(p, theta0=0.5, sigma=0.1)
    assert ds.n == 2
    with pytest.raises(ValueError, match="n >= 3"):
        fit_point_impact(ds)


def test_ingest_count_mismatch(tmp_path):
    _, p = _write_paths(tmp_path, 4)
    (tmp_path / "y.csv").write_text("1\n2\n3\n")
    with pytest.raises(ValueError, match="3 responses for 4"):
        ingest(p, tmp_path / "y.csv")


def test_ingest_non_monotone_grid(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,0,0.5,0.4\na,0,1,2\n")
    with pytest.raises(ValueError):
        ingest(p, theta0=0.5, sigma=0.1)


def test_ingest_needs_truth_to_synthesize(tmp_path):
    _, p = _write_paths(tmp_path, 4)
    with pytest.raises(ValueError):
        ingest(p)


def test_dataset_csv_readable_by_ingest_path(tmp_path):
    # a Dataset written with to_csv reloads losslessly through the CLI data path
    from pointimpact.scenarios import Dataset

    ts, p = _write_paths(tmp_path, 5)
    ds = ingest(p, theta0=0.3, sigma=0.2, seed=4)
    ds.to_csv(tmp_path / "d.csv")
    back = Dataset.from_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.y, ds.y)
    np.testing.assert_array_equal(back.X, ds.X)


def test_rough_trajectories_shape():
    ts = synthesize_rough_trajectories(n=4, m=30, amplitude=0.5, seed=1)
    assert ts.values.shape == (4, 30) and ts.notes["amplitude"] == 0.5
    base = synthesize_rough_trajectories(n=4, m=30, amplitude=1.0, seed=1)
    np.testing.assert_allclose(ts.values, 0.5 * base.values)
