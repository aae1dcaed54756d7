"""Coverage experiments, data ingestion and report emission.

Randomness in :func:`run_coverage_experiment` is keyed by
``(master seed, replicate, purpose)``: trajectories, response noise and
each interval method draw from their own substreams.  Adding or dropping
a method therefore leaves the other methods' results untouched, and the
outcome does not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import numpy as np

from ._rng import substream
from .bootstrap import BootstrapConfig, pairs_bootstrap, percentile_ci, residual_bootstrap
from .estimation import fit_point_impact
from .fbm import FbmSpec, Grid, TrajectorySet, read_trajectory_csv, sample_fbm_cholesky, sample_fbm_circulant
from .limit_dist import QuantileTable, wald_ci
from .scenarios import (
    Dataset,
    PointImpactParams,
    WeightFunction,
    gen_functional_linear,
    gen_partial_misspec,
    gen_point_impact,
    pseudo_true_theta,
)

METHODS = ("WaldH", "ResidualBoot", "PairsBoot")
REPORT_FIELDS = (
    "scenario", "n", "sigma", "H", "theta0", "level", "reps", "boot_B", "seed",
    "method", "coverage", "avg_width", "mc_standard_error",
)


def default_quantile_table() -> QuantileTable:
    """The pregenerated table shipped with the package."""
    with resources.as_file(resources.files("pointimpact") / "data" / "quantiles.csv") as p:
        return QuantileTable.from_csv(p)


@dataclass
class ExperimentConfig:
    n: int = 20
    sigma: float = 0.3
    H: float = 0.5
    theta0: float = 0.5
    alpha0: float = 0.0
    beta0: float = 1.0
    grid_size: int = 101
    outer_reps: int = 500
    methods: tuple = METHODS
    boot_B: int = 1000
    level: float = 0.95
    scenario: str = "CorrectSpec"
    f: str = "0"
    seed: int = 2010
    ci_form: str = "percentile"
    sampler: str = "cholesky"

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = tuple(m.strip() for m in self.methods.split(",") if m.strip())
        self.methods = tuple(self.methods)
        if self.grid_size < 3:
            raise ValueError("grid_size must be >= 3")
        if self.outer_reps < 1:
            raise ValueError("outer_reps must be >= 1")
        if not 0.0 < self.level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if self.scenario not in ("CorrectSpec", "PartialMisspec", "CompleteMisspec"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.sampler not in ("cholesky", "circulant"):
            raise ValueError(f"unknown sampler {self.sampler!r}")

    # flat key = value files
    def dumps(self) -> str:
        out = []
        for fl in fields(self):
            v = getattr(self, fl.name)
            out.append(f"{fl.name} = {','.join(v) if isinstance(v, tuple) else v}")
        return "\n".join(out) + "\n"

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        kinds = {fl.name: fl.type for fl in fields(cls)}
        kw = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or key not in kinds:
                raise ValueError(f"config line {lineno}: cannot parse {line!r}")
            kind = kinds[key]
            if kind == "int":
                kw[key] = int(val)
            elif kind == "float":
                kw[key] = float(val)
            else:
                kw[key] = val
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.loads(Path(path).read_text())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        return d


@dataclass
class ResultRow:
    config: ExperimentConfig
    method: str
    coverage: float
    avg_width: float
    mc_standard_error: float
    wall_time: float = 0.0

    def record(self) -> dict:
        c = self.config
        return {
            "scenario": c.scenario, "n": c.n, "sigma": c.sigma, "H": c.H, "theta0": c.theta0,
            "level": c.level, "reps": c.outer_reps, "boot_B": c.boot_B, "seed": c.seed,
            "method": self.method, "coverage": self.coverage, "avg_width": self.avg_width,
            "mc_standard_error": self.mc_standard_error,
        }


@dataclass
class ReplicateRecord:
    index: int
    theta_hat: float
    beta_hat: float
    covered: dict = field(default_factory=dict)
    width: dict = field(default_factory=dict)


def _scenario_data(cfg: ExperimentConfig, grid: Grid, rep: int) -> tuple[Dataset, float]:
    spec = FbmSpec(cfg.H, grid)
    sampler = sample_fbm_cholesky if cfg.sampler == "cholesky" else sample_fbm_circulant
    paths = sampler(spec, cfg.n, substream(cfg.seed, rep, "paths"))
    noise_rng = substream(cfg.seed, rep, "noise")
    f = WeightFunction.parse(cfg.f)
    if cfg.scenario == "CompleteMisspec":
        target = pseudo_true_theta(f, cfg.H)["theta"]
        return gen_functional_linear(f, cfg.sigma, paths, noise_rng), grid.points[grid.nearest_index(target)]
    params = PointImpactParams(cfg.alpha0, cfg.beta0, cfg.theta0, cfg.sigma)
    if cfg.scenario == "PartialMisspec":
        ds = gen_partial_misspec(params, f, paths, noise_rng)
    else:
        ds = gen_point_impact(params, paths, noise_rng)
    return ds, ds.truth["theta0"]


def run_replicate(cfg: ExperimentConfig, rep: int, table: QuantileTable | None) -> ReplicateRecord:
    grid = Grid.linspace(0.0, 1.0, cfg.grid_size)
    data, target = _scenario_data(cfg, grid, rep)
    fit = fit_point_impact(data)
    rec = ReplicateRecord(rep, fit.theta_hat, fit.beta_hat)
    for method in cfg.methods:
        boot_seed = int(substream(cfg.seed, rep, method).integers(0, 2**63 - 1))
        if method == "WaldH":
            if fit.beta_hat == 0.0:
                ci = None
            else:
                ci = wald_ci(fit, cfg.H, data.n, cfg.level, table, grid.span)
        elif method == "ResidualBoot":
            dist = residual_bootstrap(data, fit, BootstrapConfig(cfg.boot_B, "Residual", boot_seed, cfg.level))
            ci = percentile_ci(dist, cfg.level, form=cfg.ci_form)
        else:
            dist = pairs_bootstrap(data, BootstrapConfig(cfg.boot_B, "Pairs", boot_seed, cfg.level))
            ci = percentile_ci(dist, cfg.level, form=cfg.ci_form)
        if ci is None:
            rec.covered[method], rec.width[method] = True, float(grid.span[1] - grid.span[0])
        else:
            rec.covered[method], rec.width[method] = ci.contains(target), ci.width
    return rec


def _run_block(args):
    cfg, reps, table = args
    return [run_replicate(cfg, r, table) for r in reps]


def run_coverage_experiment(cfg: ExperimentConfig, table: QuantileTable | None = None,
                            workers: int = 1, progress=None, return_replicates: bool = False):
    """Monte Carlo coverage and average width of each requested interval method.

    Returns a list of :class:`ResultRow` (and the per-replicate records when
    ``return_replicates`` is set).  ``mc_standard_error`` is the binomial
    standard error ``sqrt(p (1 - p) / reps)`` of the coverage estimate.
    """
    if "WaldH" in cfg.methods:
        table = default_quantile_table() if table is None else table
        key = (cfg.H, (1.0 - cfg.level) / 2.0)
        if key not in table:
            raise KeyError(f"quantile table lacks H={key[0]}, alpha={key[1]} needed for WaldH")
    start = time.perf_counter()
    reps = list(range(cfg.outer_reps))
    if workers > 1:
        blocks = [reps[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as ex:
            records = [r for block in ex.map(_run_block, [(cfg, b, table) for b in blocks]) for r in block]
        records.sort(key=lambda r: r.index)
    else:
        records = []
        for r in reps:
            records.append(run_replicate(cfg, r, table))
            if progress is not None:
                progress(r + 1, cfg.outer_reps)
    elapsed = time.perf_counter() - start
    rows = []
    for method in cfg.methods:
        cov = np.array([rec.covered[method] for rec in records], dtype=float)
        wid = np.array([rec.width[method] for rec in records], dtype=float)
        p = float(cov.mean())
        rows.append(ResultRow(cfg, method, p, float(wid.mean()),
                              math.sqrt(p * (1.0 - p) / cov.size), elapsed))
    return (rows, records) if return_replicates else rows


# ingestion -----------------------------------------------------------------


def _read_responses(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and rows[0][0].strip().lower() == "y":
        rows = rows[1:]
    vals = []
    for lineno, r in enumerate(rows, start=1):
        if len(r) != 1:
            raise ValueError(f"{path}:{lineno}: expected one response per line")
        vals.append(float(r[0]))
    return np.array(vals, dtype=float)


def ingest(trajectory_csv, response_csv=None, theta0: float | None = None, sigma: float | None = None,
           alpha0: float = 0.0, beta0: float = 1.0, seed: int = 0) -> Dataset:
    """Read external trajectories (and responses) into a :class:`Dataset`.

    Without a response file, responses are synthesized from the point
    impact model at ``(theta0, sigma)`` on the ingested trajectories.
    """
    ts, ids = read_trajectory_csv(trajectory_csv)
    if response_csv is not None:
        y = _read_responses(response_csv)
        if y.size != ts.n:
            raise ValueError(f"{y.size} responses for {ts.n} subjects")
        return Dataset(ts, y, "External", {"ids": ids})
    if theta0 is None or sigma is None:
        raise ValueError("without responses, theta0 and sigma are needed to synthesize them")
    params = PointImpactParams(alpha0, beta0, theta0, sigma, degenerate=not 0 < theta0 < 1)
    ds = gen_point_impact(params, ts, seed)
    return Dataset(ts, ds.responses, "External", ds.truth | {"ids": ids, "synthesized": True}, seed)


# reports -------------------------------------------------------------------


def emit_report(rows, fmt: str, out) -> Path:
    """Write result rows as CSV (columns ``REPORT_FIELDS``) or JSON."""
    out = Path(out)
    records = [r.record() if isinstance(r, ResultRow) else dict(r) for r in rows]
    if fmt == "csv":
        with open(out, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=REPORT_FIELDS, lineterminator="\n")
            w.writeheader()
            for rec in records:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in rec.items()})
    elif fmt == "json":
        configs = [r.config.to_dict() for r in rows if isinstance(r, ResultRow)]
        payload = {"config": configs[0] if configs else None, "rows": records}
        out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return out


def read_report(path) -> list[dict]:
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text())["rows"]
    ints = {"n", "reps", "boot_B", "seed"}
    strs = {"scenario", "method"}
    with open(path, newline="") as fh:
        return [{k: (v if k in strs else int(v) if k in ints else float(v)) for k, v in row.items()}
                for row in csv.DictReader(fh)]


def emit_histogram_data(values, bins: int, out) -> Path:
    """Equal-width histogram over ``[min, max]`` as CSV ``bin_left,bin_right,count``."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("no values to bin")
    counts, edges = np.histogram(v, bins=bins, range=(float(v.min()), float(v.max())))
    out = Path(out)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin_left", "bin_right", "count"])
        for lo, hi, c in zip(edges[:-1], edges[1:], counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
    return out


def synthesize_rough_trajectories(n: int = 40, m: int = 518, H: float = 0.1, amplitude: float = 1.0,
                                  seed: int = 0) -> TrajectorySet:
    """Rough fBm trajectories standing in for expression profiles (``m`` loci on [0, 1])."""
    grid = Grid.linspace(0.0, 1.0, m)
    ts = sample_fbm_cholesky(FbmSpec(H, grid), n, seed)
    return TrajectorySet(grid, amplitude * ts.values, H, seed, ts.method, {"amplitude": amplitude})
