"""Sensitive time point estimation in point impact models driven by fBm."""

from .bootstrap import (
    BootstrapConfig,
    BootstrapDistribution,
    ConfidenceInterval,
    pairs_bootstrap,
    percentile_ci,
    residual_bootstrap,
)
from .estimation import Design, FitResult, fit_extended, fit_point_impact, fit_two_sample
from .fbm import FactorizationError, FbmSpec, Grid, TrajectorySet, estimate_hurst, sample_fbm
from .harness import ExperimentConfig, ResultRow, ingest, run_coverage_experiment
from .limit_dist import LimitRegime, QuantileTable, UnconvergedError, simulate_argmin, wald_ci
from .scenarios import Dataset, PointImpactParams, WeightFunction, gen_point_impact

__version__ = "0.1.0"
