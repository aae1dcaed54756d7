"""Data generators for the point impact model and its misspecified variants.

Regimes
-------
``CorrectSpec``      Y = a + b X(theta0) + eps
``CompleteMisspec``  Y = int_0^1 f(t) X(t) dt + eps
``PartialMisspec``   Y = a + b X(theta0) + int_0^1 f(t) X(t) dt + eps
``External``         trajectories and responses read from files

plus the two-sample design with fBm noise around group mean functions.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from ._rng import as_generator
from .fbm import FbmSpec, Grid, TrajectorySet, sample_fbm

REGIMES = ("CorrectSpec", "CompleteMisspec", "PartialMisspec", "External")


@dataclass(frozen=True)
class PointImpactParams:
    alpha0: float = 0.0
    beta0: float = 1.0
    theta0: float = 0.5
    sigma: float = 0.3
    degenerate: bool = False

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not self.degenerate:
            if not 0.0 < self.theta0 < 1.0:
                raise ValueError("theta0 must lie in (0, 1); pass degenerate=True to override")
            if self.beta0 == 0.0:
                raise ValueError("beta0 = 0 makes theta0 unidentifiable; pass degenerate=True to override")


class WeightFunction:
    """Weight ``f`` on [0, 1] for the functional linear part.

    Build with :meth:`constant`, :meth:`indicator`, :meth:`polynomial` or
    :meth:`tabulated`.  Closed forms are used for the tail integral
    ``int_theta^1 f`` wherever they exist.
    """

    def __init__(self, kind: str, params: dict):
        self.kind = kind
        self.params = params
        if kind == "tabulated":
            p = params
            self._t = np.asarray(p["points"], dtype=float)
            self._v = np.asarray(p["values"], dtype=float)
            if self._t.shape != self._v.shape or not np.all(np.isfinite(self._v)):
                raise ValueError("tabulated weight needs finite values aligned with its points")

    @classmethod
    def constant(cls, c: float) -> "WeightFunction":
        return cls("constant", {"c": float(c)})

    @classmethod
    def zero(cls) -> "WeightFunction":
        return cls.constant(0.0)

    @classmethod
    def indicator(cls, lo: float, hi: float, height: float = 1.0) -> "WeightFunction":
        if not 0 <= lo < hi <= 1:
            raise ValueError("indicator needs 0 <= lo < hi <= 1")
        return cls("indicator", {"lo": float(lo), "hi": float(hi), "height": float(height)})

    @classmethod
    def polynomial(cls, coefs) -> "WeightFunction":
        """``f(t) = sum_k coefs[k] t^k``."""
        return cls("polynomial", {"coefs": [float(c) for c in coefs]})

    @classmethod
    def tabulated(cls, grid: Grid, values) -> "WeightFunction":
        return cls("tabulated", {"points": grid.points.tolist(), "values": list(map(float, values))})

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k, p = self.kind, self.params
        if k == "constant":
            out = np.full(t.shape, p["c"])
        elif k == "indicator":
            out = np.where((t >= p["lo"]) & (t <= p["hi"]), p["height"], 0.0)
        elif k == "polynomial":
            out = np.polynomial.polynomial.polyval(t, p["coefs"])
        elif k == "tabulated":
            out = np.interp(t, self._t, self._v)
        else:
            raise ValueError(f"unknown weight kind {k!r}")
        return float(out) if out.ndim == 0 else out

    @property
    def breakpoints(self) -> list[float]:
        if self.kind == "indicator":
            return [self.params["lo"], self.params["hi"]]
        return []

    def is_zero(self) -> bool:
        if self.kind == "constant":
            return self.params["c"] == 0.0
        if self.kind == "indicator":
            return self.params["height"] == 0.0
        if self.kind == "polynomial":
            return not any(self.params["coefs"])
        return not np.any(self._v)

    def tail_integral(self, theta: float) -> float:
        """``int_theta^1 f(t) dt``."""
        k, p = self.kind, self.params
        if k == "constant":
            return p["c"] * (1.0 - theta)
        if k == "indicator":
            return p["height"] * max(0.0, p["hi"] - max(theta, p["lo"]))
        if k == "polynomial":
            anti = np.polynomial.polynomial.polyint(p["coefs"])
            return float(np.polynomial.polynomial.polyval(1.0, anti) - np.polynomial.polynomial.polyval(theta, anti))
        return float(integrate.quad(self, theta, 1.0, points=self._t[(self._t > theta) & (self._t < 1)][:50], limit=200)[0])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightFunction":
        return cls(d["kind"], d["params"])

    @classmethod
    def parse(cls, text: str) -> "WeightFunction":
        """Parse CLI/config forms: ``0.5``, ``const:0.5``, ``ind:0.6:1``, ``poly:1,0,2``."""
        text = text.strip()
        head, _, rest = text.partition(":")
        if not rest:
            return cls.constant(float(head))
        if head in ("const", "constant"):
            return cls.constant(float(rest))
        if head in ("ind", "indicator"):
            parts = [float(x) for x in rest.split(":")]
            return cls.indicator(*parts)
        if head in ("poly", "polynomial"):
            return cls.polynomial([float(x) for x in rest.split(",")])
        raise ValueError(f"cannot parse weight function {text!r}")

    def __repr__(self) -> str:
        return f"WeightFunction({self.kind}, {self.params if self.kind != 'tabulated' else '...'})"


@dataclass(eq=False)
class Dataset:
    trajectories: TrajectorySet
    responses: np.ndarray
    scenario: str = "CorrectSpec"
    truth: dict = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        self.responses = np.asarray(self.responses, dtype=float).ravel()
        if self.responses.size != self.trajectories.n:
            raise ValueError(
                f"{self.responses.size} responses for {self.trajectories.n} trajectories"
            )
        if self.scenario not in REGIMES:
            raise ValueError(f"unknown scenario {self.scenario!r}")

    @property
    def n(self) -> int:
        return self.responses.size

    @property
    def grid(self) -> Grid:
        return self.trajectories.grid

    @property
    def X(self) -> np.ndarray:
        return self.trajectories.values

    @property
    def y(self) -> np.ndarray:
        return self.responses

    def to_csv(self, path) -> None:
        """One row per subject: ``y`` then the trajectory on the grid."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["y", *map(repr, self.grid.points.tolist())])
            for yi, row in zip(self.responses, self.X):
                w.writerow([repr(float(yi)), *map(repr, row.tolist())])

    def truth_json(self) -> str:
        return json.dumps({"scenario": self.scenario, "truth": self.truth, "seed": self.seed,
                           "hurst": self.trajectories.hurst_used}, sort_keys=True)

    @classmethod
    def from_csv(cls, path, truth_path=None) -> "Dataset":
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if not rows or rows[0][0] != "y":
            raise ValueError(f"{path}: expected header starting with 'y'")
        grid = Grid([float(x) for x in rows[0][1:]])
        for lineno, r in enumerate(rows[1:], start=2):
            if len(r) != len(rows[0]):
                raise ValueError(f"{path}:{lineno}: ragged row")
        arr = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(-1, len(grid) + 1)
        scenario, truth, seed, hurst = "External", {}, None, None
        if truth_path is not None:
            meta = json.loads(open(truth_path).read())
            scenario, truth, seed, hurst = meta["scenario"], meta["truth"], meta.get("seed"), meta.get("hurst")
        ts = TrajectorySet(grid, arr[:, 1:], hurst_used=hurst)
        return cls(ts, arr[:, 0], scenario, truth, seed)


def functional_integral(path, f: WeightFunction | Callable, grid: Grid):
    """Trapezoidal ``int f(t) X(t) dt`` over the grid span.

    ``path`` may be one trajectory or an ``n x m`` matrix (one value per row).
    """
    x = np.asarray(path, dtype=float)
    w = np.asarray(f(grid.points), dtype=float) * np.ones(len(grid))
    return np.trapezoid(w * x, grid.points, axis=-1)


def _snap(grid: Grid, theta0: float) -> tuple[int, float]:
    idx = grid.nearest_index(theta0)
    return idx, float(grid.points[idx])


def _noise(n: int, sigma: float, gen: np.random.Generator, noise: Callable | None):
    if noise is None:
        return sigma * gen.standard_normal(n)
    return np.asarray(noise(gen, n), dtype=float)


def gen_point_impact(params: PointImpactParams, paths: TrajectorySet, rng=None, noise=None) -> Dataset:
    """Responses ``alpha0 + beta0 X(theta0) + eps`` on the given trajectories.

    ``theta0`` is snapped to the nearest grid point; both values are kept in
    ``truth``.  ``noise(gen, n)`` may replace the default ``N(0, sigma^2)``.
    """
    gen = as_generator(rng)
    idx, snapped = _snap(paths.grid, params.theta0)
    eps = _noise(paths.n, params.sigma, gen, noise)
    y = params.alpha0 + params.beta0 * paths.values[:, idx] + eps
    truth = asdict(params) | {"theta0_requested": params.theta0, "theta0": snapped, "theta_index": idx}
    return Dataset(paths, y, "CorrectSpec", truth, rng if isinstance(rng, int) else None)


def gen_functional_linear(f: WeightFunction, sigma: float, paths: TrajectorySet, rng=None,
                          noise=None, alpha: float = 0.0) -> Dataset:
    """Responses ``alpha + int f X + eps`` (complete misspecification)."""
    gen = as_generator(rng)
    y = alpha + functional_integral(paths.values, f, paths.grid) + _noise(paths.n, sigma, gen, noise)
    truth = {"alpha": alpha, "sigma": sigma, "f": f.to_dict()}
    return Dataset(paths, y, "CompleteMisspec", truth, rng if isinstance(rng, int) else None)


def gen_partial_misspec(params: PointImpactParams, f: WeightFunction, paths: TrajectorySet,
                        rng=None, noise=None) -> Dataset:
    """Point impact plus a spread-out functional effect.

    With ``f = 0`` the output equals :func:`gen_point_impact` for the same
    seed (only the regime tag differs).
    """
    ds = gen_point_impact(params, paths, rng, noise)
    ds.responses = ds.responses + functional_integral(paths.values, f, paths.grid)
    ds.scenario = "PartialMisspec"
    ds.truth["f"] = f.to_dict()
    return ds


# misspecified criterion ----------------------------------------------------


def _cross_term(theta: float, f: WeightFunction, H: float) -> float:
    # int_0^1 f(t) [t^2H + theta^2H - |theta - t|^2H] dt
    h2 = 2 * H
    pts = sorted({theta, *f.breakpoints} - {0.0, 1.0})
    val, _ = integrate.quad(
        lambda t: f(t) * (t**h2 + theta**h2 - abs(theta - t) ** h2),
        0.0, 1.0, points=pts or None, limit=200, epsabs=1e-13, epsrel=1e-12,
    )
    return val


def misspec_criterion_M(theta: float, f: WeightFunction, H: float, theta0: float | None = None) -> float:
    """Population least-squares criterion of the working model, additive constant 0.

    With ``theta0=None`` the data follow the functional linear model
    (complete misspecification) and ``M(theta) = theta^2H - I(theta)``;
    otherwise the data carry a unit point impact at ``theta0`` and
    ``M(theta) = |theta - theta0|^2H - I(theta)``, where
    ``I(theta) = int f(t) [t^2H + theta^2H - |theta - t|^2H] dt``.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    if not 0.0 < H < 1.0:
        raise ValueError("H must lie in (0, 1)")
    lead = abs(theta) ** (2 * H) if theta0 is None else abs(theta - theta0) ** (2 * H)
    return lead - _cross_term(theta, f, H)


def misspec_criterion_dM(theta: float, f: WeightFunction) -> float:
    """``M'(theta) = 1 - 2 int_theta^1 f`` (Brownian trajectories, complete misspecification)."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1]")
    return 1.0 - 2.0 * f.tail_integral(theta)


def misspec_criterion_d2M(theta: float, f: WeightFunction) -> float:
    """``M''(theta) = 2 f(theta)`` (Brownian trajectories)."""
    return 2.0 * float(f(theta))


def minimize_criterion(f: WeightFunction, H: float, theta0: float | None = None, num: int = 10_001):
    """Dense-grid minimizer of :func:`misspec_criterion_M` on [0, 1]; returns (theta, M)."""
    ts = np.linspace(0.0, 1.0, num)
    vals = np.array([misspec_criterion_M(t, f, H, theta0) for t in ts])
    i = int(np.argmin(vals))
    return float(ts[i]), float(vals[i])


def pseudo_true_theta(f: WeightFunction, H: float = 0.5) -> dict:
    """Pseudo-true sensitive point under complete misspecification.

    For Brownian trajectories the root of ``M'`` is located by bracketing;
    if ``M'`` does not change sign the minimizer sits on the boundary and
    ``interior`` is False.  Other ``H`` use the dense-grid minimizer.
    """
    if H != 0.5:
        theta, _ = minimize_criterion(f, H)
        return {"theta": theta, "interior": 0.0 < theta < 1.0}
    from scipy.optimize import brentq

    lo, hi = misspec_criterion_dM(0.0, f), misspec_criterion_dM(1.0, f)
    if lo < 0 < hi:
        theta = brentq(lambda t: misspec_criterion_dM(t, f), 0.0, 1.0, xtol=1e-14)
        return {"theta": float(theta), "interior": True}
    theta, _ = minimize_criterion(f, H)
    return {"theta": theta, "interior": False}


def criterion_scale_a2(f: WeightFunction, H: float, sigma: float, theta0: float,
                       point_impact: bool = False, num: int = 2001) -> float:
    """``a^2 = E[Y - X(theta0)]^2`` with unit working slope and zero intercept.

    Computed directly from the fBm covariance (no additive constant is
    involved): ``sigma^2 + Var(int f X - X(theta0))`` for complete
    misspecification, ``sigma^2 + Var(int f X)`` when the data also carry
    the unit point impact at ``theta0``.
    """
    from .fbm import covariance_matrix

    t = np.linspace(0.0, 1.0, num)
    w = np.asarray(f(t), dtype=float) * np.ones(num)
    trap = np.full(num, t[1] - t[0])
    trap[[0, -1]] *= 0.5
    wq = w * trap
    R = covariance_matrix(t, H)
    var_int = float(wq @ R @ wq)
    if point_impact:
        return sigma**2 + var_int
    r_theta = 0.5 * (t ** (2 * H) + theta0 ** (2 * H) - np.abs(t - theta0) ** (2 * H))
    cross = float(wq @ r_theta)
    return sigma**2 + var_int - 2 * cross + theta0 ** (2 * H)


# two-sample design ---------------------------------------------------------


@dataclass(eq=False)
class TwoSampleData:
    group1: TrajectorySet
    group2: TrajectorySet
    mean1: np.ndarray
    mean2: np.ndarray
    theta0: float | None
    smoothness: float
    rho: float
    degenerate: bool = False

    def __post_init__(self):
        if self.group1.grid != self.group2.grid:
            raise ValueError("both groups must share one grid")
        if self.rho <= 0:
            raise ValueError("rho must be positive")

    @property
    def grid(self) -> Grid:
        return self.group1.grid


def gen_two_sample(mean1: Callable, mean2: Callable, n1: int, n2: int, H: float, grid: Grid,
                   rng=None, smoothness: float | None = None) -> TwoSampleData:
    """Two groups of trajectories ``mu_j(t) + fBm``.

    The sensitive point recorded in ``theta0`` is the grid maximizer of
    ``mu_1 - mu_2``; when that difference is flat on the grid the data are
    flagged ``degenerate`` and ``theta0`` is None.
    """
    if n1 < 1 or n2 < 1:
        raise ValueError("both groups need at least one trajectory")
    gen = as_generator(rng)
    m1 = np.asarray(mean1(grid.points), dtype=float) * np.ones(len(grid))
    m2 = np.asarray(mean2(grid.points), dtype=float) * np.ones(len(grid))
    spec = FbmSpec(H, grid)
    p1 = sample_fbm(spec, n1, gen)
    p2 = sample_fbm(spec, n2, gen)
    g1 = TrajectorySet(grid, p1.values + m1, H, method=p1.method)
    g2 = TrajectorySet(grid, p2.values + m2, H, method=p2.method)
    effect = m1 - m2
    degenerate = bool(np.ptp(effect) == 0.0) or int(np.sum(effect == effect.max())) > 1
    theta0 = None if degenerate else float(grid.points[int(np.argmax(effect))])
    return TwoSampleData(g1, g2, m1, m2, theta0, H if smoothness is None else smoothness,
                         n1 / n2, degenerate)


def cusp_effect(theta0: float = 0.5, c: float = 1.0, S: float = 0.5) -> Callable:
    """Treatment effect ``1 - c |t - theta0|^{2S}`` with a cusp of smoothness ``S``."""
    return lambda t: 1.0 - c * np.abs(np.asarray(t, dtype=float) - theta0) ** (2 * S)

