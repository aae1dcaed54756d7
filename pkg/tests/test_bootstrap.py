"""Tests for residual / pairs bootstrap and percentile intervals."""

import inspect

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pointimpact import bootstrap
from pointimpact.bootstrap import (
    BootstrapConfig,
    BootstrapDistribution,
    ConfidenceInterval,
    lower_quantile,
    pairs_bootstrap,
    percentile_ci,
    residual_bootstrap,
)
from pointimpact.estimation import fit_point_impact
from pointimpact.fbm import FbmSpec, Grid, TrajectorySet, sample_fbm_circulant
from pointimpact.scenarios import Dataset, PointImpactParams, gen_point_impact

GRID = Grid.linspace(0, 1, 101)


def _data(n=20, sigma=0.3, seed=0, alpha0=0.0):
    ts = sample_fbm_circulant(FbmSpec(0.5, GRID), n, seed)
    return gen_point_impact(PointImpactParams(alpha0, 1.0, 0.5, sigma), ts, seed + 1)


def _dist(theta_star, center=0.5, kind="Residual"):
    t = np.asarray(theta_star, dtype=float)
    z = np.zeros_like(t)
    return BootstrapDistribution(t, z, z, (0.0, 1.0, center), kind)


# config --------------------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(replicates=1), dict(kind="Wild"), dict(level=1.0), dict(level=0.0)])
def test_config_guards(kw):
    with pytest.raises(ValueError):
        BootstrapConfig(**kw)


def test_interval_guard():
    with pytest.raises(ValueError):
        ConfidenceInterval(0.6, 0.4, 0.95, "Wald")


# quantile convention --------------------------------------------------------------


@pytest.mark.parametrize(
    "gamma, expected",
    [(0.025, 3.0), (0.1, 10.0), (0.5, 50.0), (0.975, 98.0), (1.0, 100.0), (0.0, 1.0)],
)
def test_lower_quantile_order_statistic(gamma, expected):
    assert lower_quantile(np.arange(100, 0, -1.0), gamma) == expected


def test_hand_built_interval():
    d = _dist(0.5 + np.repeat([-0.02, -0.01, 0.0, 0.01, 0.02], 200))
    ci = percentile_ci(d, 0.95)
    assert (ci.lo, ci.hi) == pytest.approx((0.48, 0.52), abs=1e-15)
    basic = percentile_ci(d, 0.95, form="basic")
    assert (basic.lo, basic.hi) == pytest.approx((0.48, 0.52), abs=1e-15)


def test_skewed_forms_differ():
    d = _dist(np.concatenate([np.full(900, 0.5), np.full(100, 0.8)]), center=0.5)
    p = percentile_ci(d, 0.9)
    b = percentile_ci(d, 0.9, form="basic")
    assert (p.lo, p.hi) == pytest.approx((0.5, 0.8))
    assert (b.lo, b.hi) == pytest.approx((0.2, 0.5))


def test_unknown_form():
    with pytest.raises(ValueError):
        percentile_ci(_dist([0.5, 0.5]), form="studentized")


def test_interval_clipped_to_span():
    d = _dist(np.linspace(0.0, 0.04, 1000), center=0.01)
    ci = percentile_ci(d, 0.95, form="basic")
    assert ci.lo >= 0.0 and ci.hi <= 1.0


def test_degenerate_distribution_zero_width():
    ci = percentile_ci(_dist(np.full(50, 0.37), center=0.37))
    assert ci.lo == ci.hi == 0.37 and ci.width == 0.0 and ci.contains(0.37)


def test_beta_interval_shift_equivariance():
    rng = np.random.default_rng(1)
    b = rng.normal(1.0, 0.1, 1000)
    d1 = BootstrapDistribution(np.full(1000, 0.5), np.zeros(1000), b, (0.0, 1.0, 0.5), "Residual")
    d2 = BootstrapDistribution(np.full(1000, 0.5), np.zeros(1000), b + 3.0, (0.0, 4.0, 0.5), "Residual")
    c1, c2 = percentile_ci(d1, param="beta"), percentile_ci(d2, param="beta")
    assert c2.lo - c1.lo == pytest.approx(3.0) and c2.hi - c1.hi == pytest.approx(3.0)
    c1b, c2b = percentile_ci(d1, param="beta", form="basic"), percentile_ci(d2, param="beta", form="basic")
    assert c2b.lo - c1b.lo == pytest.approx(3.0)


@settings(max_examples=50)
@given(
    vals=st.lists(st.integers(0, 100), min_size=2, max_size=300),
    level=st.floats(0.5, 0.99),
)
def test_interval_ordered_and_on_grid(vals, level):
    d = _dist(np.array(vals) / 100.0)
    for form in ("percentile", "basic"):
        ci = percentile_ci(d, level, form=form)
        assert 0.0 <= ci.lo <= ci.hi <= 1.0


# residual bootstrap -----------------------------------------------------------------


def test_no_hurst_parameter_anywhere():
    for name in bootstrap.__all__:
        obj = getattr(bootstrap, name)
        if callable(obj):
            params = inspect.signature(obj).parameters
            assert not any(p.lower() in ("h", "hurst") for p in params)


def test_noiseless_residual_degenerate():
    ds = _data(sigma=0.0)
    fit = fit_point_impact(ds)
    dist = residual_bootstrap(ds, fit, BootstrapConfig(200, "Residual", 1))
    assert np.all(dist.theta_star == fit.theta_hat)


def test_residual_pool_centered():
    ds = _data(seed=3)
    fit = fit_point_impact(ds)
    pool = fit.residuals - fit.residuals.mean()
    assert abs(pool.mean()) < 1e-12


def test_residual_fast_equals_slow():
    ds = _data(seed=5)
    fit = fit_point_impact(ds)
    cfg = BootstrapConfig(300, "Residual", 42)
    fast = residual_bootstrap(ds, fit, cfg)
    slow = residual_bootstrap(ds, fit, cfg, fast=False)
    np.testing.assert_array_equal(fast.theta_star, slow.theta_star)
    np.testing.assert_allclose(fast.beta_star, slow.beta_star, rtol=1e-10)
    np.testing.assert_allclose(fast.alpha_star, slow.alpha_star, rtol=1e-10, atol=1e-12)


def test_residual_seed_determinism():
    ds = _data(seed=6)
    fit = fit_point_impact(ds)
    a = residual_bootstrap(ds, fit, BootstrapConfig(100, "Residual", 9))
    b = residual_bootstrap(ds, fit, BootstrapConfig(100, "Residual", 9))
    assert np.array_equal(a.theta_star, b.theta_star) and np.array_equal(a.beta_star, b.beta_star)
    c = residual_bootstrap(ds, fit, BootstrapConfig(100, "Residual", 10))
    assert not np.array_equal(a.beta_star, c.beta_star)


def test_residual_prefix_stable():
    # replicate b depends only on (seed, b): a longer run extends a shorter one
    ds = _data(seed=6)
    fit = fit_point_impact(ds)
    a = residual_bootstrap(ds, fit, BootstrapConfig(50, "Residual", 9))
    b = residual_bootstrap(ds, fit, BootstrapConfig(600, "Residual", 9))
    np.testing.assert_array_equal(a.theta_star, b.theta_star[:50])


def test_residual_keeps_trajectories():
    ds = _data(seed=7)
    before = ds.X.copy()
    fit = fit_point_impact(ds)
    dist = residual_bootstrap(ds, fit, BootstrapConfig(50, "Residual", 0))
    np.testing.assert_array_equal(ds.X, before)
    assert np.all(np.isin(dist.theta_star, GRID.points))


def test_residual_rejects_wrong_kind():
    ds = _data()
    with pytest.raises(ValueError):
        residual_bootstrap(ds, fit_point_impact(ds), BootstrapConfig(10, "Pairs"))


def test_ci_invariant_to_response_shift():
    ds = _data(seed=12)
    shifted = Dataset(ds.trajectories, ds.y + 5.0, ds.scenario, ds.truth)
    cfg = BootstrapConfig(400, "Residual", 3)
    c0 = percentile_ci(residual_bootstrap(ds, fit_point_impact(ds), cfg))
    c1 = percentile_ci(residual_bootstrap(shifted, fit_point_impact(shifted), cfg))
    assert (c0.lo, c0.hi) == (c1.lo, c1.hi)


# pairs bootstrap ----------------------------------------------------------------------


def test_pairs_single_subject_degenerate():
    ts = TrajectorySet(GRID, np.linspace(0, 1, 101)[None, :])
    ds = Dataset(ts, [2.0])
    dist = pairs_bootstrap(ds, BootstrapConfig(20, "Pairs", 0))
    assert np.unique(dist.theta_star).size == 1


def test_pairs_determinism_and_grid():
    ds = _data(seed=13)
    a = pairs_bootstrap(ds, BootstrapConfig(300, "Pairs", 4))
    b = pairs_bootstrap(ds, BootstrapConfig(300, "Pairs", 4))
    np.testing.assert_array_equal(a.theta_star, b.theta_star)
    assert np.all(np.isin(a.theta_star, GRID.points))
    assert a.center[2] == fit_point_impact(ds).theta_hat
    assert percentile_ci(a).method == "PairsBoot"


def test_pairs_matches_refit():
    from pointimpact._rng import substream

    ds = _data(seed=14)
    dist = pairs_bootstrap(ds, BootstrapConfig(20, "Pairs", 8))
    for b in range(20):
        idx = substream(8, b).integers(0, ds.n, ds.n)
        X, y = ds.X[idx], ds.y[idx]
        if np.unique(idx).size < 3:
            continue
        f = fit_point_impact(X, y, GRID)
        assert dist.theta_star[b] == f.theta_hat
        assert dist.beta_star[b] == pytest.approx(f.beta_hat, rel=1e-9)


def test_distribution_csv(tmp_path):
    ds = _data(seed=15)
    dist = residual_bootstrap(ds, fit_point_impact(ds), BootstrapConfig(5, "Residual", 0))
    dist.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "b,theta_star,alpha_star,beta_star" and len(lines) == 6
    assert float(lines[3].split(",")[1]) == dist.theta_star[2]
