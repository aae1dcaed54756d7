"""Monte Carlo for the argmin limit laws and the Wald-type interval.

Three families of limit laws are handled, all locations of the extremum of
a two-sided fBm plus a deterministic drift:

``CorrectSpec``      argmin_t  2 s B_H(t) + |t|^{2H}          (s = sigma/|beta0|)
``CompleteMisspec``  argmin_t  2 a B_H(t) + b t^2
``TwoSample``        argmax_t  (1 + sqrt(rho)) B_H(t) - c |t|^{2H}

Self-similarity maps each law to a unit-parameter version by a constant
factor (:meth:`LimitRegime.unit_factor`), so only unit laws are tabulated.
The continuum argmin is approximated by the grid argmin on ``[-T, T]``.
``T`` is doubled until at most 0.1% of the draws fall outside ``[-T/2, T/2]``.
Counting only draws *on* the boundary is not enough: once the true argmin
lies beyond ``T`` the truncated argmin usually settles on an interior local
minimum, so the touch rate stays small while the tails are cut off.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import child_seed, substream
from .bootstrap import ConfidenceInterval, lower_quantile
from .estimation import FitResult
from .fbm import FbmSpec, Grid, sample_fbm

__all__ = [
    "LimitRegime",
    "LimitSample",
    "QuantileTable",
    "UnconvergedError",
    "quantile_table",
    "scale_correct_spec",
    "simulate_argmin",
    "upper_quantile",
    "wald_ci",
]

FAMILIES = ("CorrectSpec", "CompleteMisspec", "TwoSample")
DEFAULT_T = 8.0
DEFAULT_RESOLUTION = 2.0**-7
MAX_DOUBLINGS = 6
BOUNDARY_TOL = 1e-3
_CELLS_PER_CHUNK = 1 << 21


class UnconvergedError(RuntimeError):
    def __init__(self, regime, history):
        self.regime = regime
        self.history = history
        steps = ", ".join(f"T={T:g}: {frac:.4f}" for T, frac in history)
        super().__init__(f"argmin not confined for {regime} (fractions beyond T/2: {steps})")


@dataclass(frozen=True)
class LimitRegime:
    family: str
    H: float
    scale: float = 1.0
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown regime family {self.family!r}")
        if not 0.0 < self.H <= 1.0:
            raise ValueError("H must lie in (0, 1]")
        if min(self.scale, self.a, self.b, self.c, self.rho) <= 0:
            raise ValueError("regime parameters must be positive")

    @classmethod
    def correct_spec(cls, H: float, sigma: float = 1.0, beta0: float = 1.0) -> "LimitRegime":
        return cls("CorrectSpec", H, scale=sigma / abs(beta0))

    @classmethod
    def complete_misspec(cls, H: float, a: float = 1.0, b: float = 1.0) -> "LimitRegime":
        return cls("CompleteMisspec", H, a=a, b=b)

    @classmethod
    def two_sample(cls, H: float, c: float = 1.0, rho: float = 1.0) -> "LimitRegime":
        return cls("TwoSample", H, c=c, rho=rho)

    def objective(self, t: np.ndarray, paths: np.ndarray) -> np.ndarray:
        """Process whose grid argmin is recorded (sign-flipped for TwoSample)."""
        H = self.H
        if self.family == "CorrectSpec":
            return 2.0 * self.scale * paths + np.abs(t) ** (2 * H)
        if self.family == "CompleteMisspec":
            return 2.0 * self.a * paths + self.b * t**2
        return -((1.0 + math.sqrt(self.rho)) * paths - self.c * np.abs(t) ** (2 * H))

    def unit(self) -> "LimitRegime":
        """Unit-parameter law this regime reduces to."""
        if self.family == "CompleteMisspec":
            return LimitRegime("CompleteMisspec", self.H)
        return LimitRegime("CorrectSpec", self.H)

    def unit_factor(self) -> float:
        """Multiplier taking unit-law draws to draws of this regime."""
        H = self.H
        if self.family == "CorrectSpec":
            return self.scale ** (1.0 / H)
        if self.family == "CompleteMisspec":
            return (self.a / self.b) ** (1.0 / (2.0 - H))
        return ((1.0 + math.sqrt(self.rho)) / (2.0 * self.c)) ** (1.0 / H)

    def label(self) -> str:
        return self.family


@dataclass(eq=False)
class LimitSample:
    draws: np.ndarray
    T: float
    resolution: float
    outer_fraction: float  # share of draws with |t| >= T/2
    regime: LimitRegime
    seed: int
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.outer_fraction <= BOUNDARY_TOL

    def upper_quantile(self, alpha: float) -> float:
        return upper_quantile(self.draws, alpha)

    def quantile_se(self, alpha: float) -> float:
        return quantile_se(self.draws, 1.0 - alpha)


def upper_quantile(draws, alpha: float) -> float:
    """Upper ``alpha`` quantile: order statistic ``ceil((1 - alpha) N)``."""
    return lower_quantile(draws, 1.0 - alpha)


def quantile_se(draws, gamma: float) -> float:
    """Standard error of the ``gamma`` quantile from the binomial order-statistic band."""
    v = np.sort(np.asarray(draws, dtype=float))
    N = v.size
    half = math.sqrt(N * gamma * (1.0 - gamma))
    lo = int(np.clip(math.floor(gamma * N - half), 1, N)) - 1
    hi = int(np.clip(math.ceil(gamma * N + half), 1, N)) - 1
    return float(v[hi] - v[lo]) / 2.0


def _chunk_argmin(regime: LimitRegime, grid: Grid, seed: int, chunk_id: int, k: int) -> np.ndarray:
    gen = substream(seed, chunk_id)
    paths = sample_fbm(FbmSpec(regime.H, grid), k, gen).values
    return np.argmin(regime.objective(grid.points, paths), axis=1)


def simulate_argmin(regime: LimitRegime, draws: int, T: float = DEFAULT_T,
                    resolution: float = DEFAULT_RESOLUTION, rng=0, workers: int = 1,
                    max_doublings: int = MAX_DOUBLINGS) -> LimitSample:
    """Draw grid argmin locations of the regime's process on ``[-T, T]``.

    Two-sided fBm paths come from :func:`pointimpact.fbm.sample_fbm` on a
    symmetric uniform grid (exact law at the grid points).  Draws are
    produced in chunks with substreams ``(seed, chunk)``; the chunk size
    depends only on the grid size, so results do not depend on ``workers``.
    When more than 0.1% of argmins land outside ``[-T/2, T/2]`` the whole
    batch is rerun with ``T`` doubled, at most ``max_doublings`` times.
    The grid spacing doubles along with ``T`` (constant number of points),
    so ``resolution`` is the spacing of the first window only.
    """
    if draws < 1:
        raise ValueError("draws must be >= 1")
    if T <= 0 or resolution <= 0:
        raise ValueError("T and resolution must be positive")
    seed = rng if isinstance(rng, (int, np.integer)) else child_seed(rng)
    history = []
    limit = BOUNDARY_TOL * draws
    for _ in range(max_doublings + 1):
        grid = Grid.symmetric(T, resolution)
        m = len(grid)
        mid, quarter = (m - 1) // 2, (m - 1) / 4.0
        per = max(1, _CELLS_PER_CHUNK // m)
        starts = list(range(0, draws, per))
        jobs = [(c, min(per, draws - s)) for c, s in enumerate(starts)]
        idx = np.empty(draws, dtype=np.int64)
        hits = 0
        run = lambda job: _chunk_argmin(regime, grid, int(seed), job[0], job[1])  # noqa: E731
        if workers > 1:
            with ThreadPoolExecutor(workers) as ex:
                results = list(ex.map(run, jobs))
        else:
            results = []
            for job in jobs:
                r = run(job)
                results.append(r)
                hits += int(np.count_nonzero(np.abs(r - mid) >= quarter))
                if hits > limit:
                    break
        # cut at the first chunk that overflows, identically for any worker count
        hits, done = 0, 0
        for r in results:
            hits += int(np.count_nonzero(np.abs(r - mid) >= quarter))
            done += r.size
            if hits > limit:
                break
        if hits > limit:
            history.append((T, hits / done))
            T, resolution = 2.0 * T, 2.0 * resolution
            continue
        for (c, k), r, s in zip(jobs, results, starts):
            idx[s : s + k] = r
        frac = hits / draws
        history.append((T, frac))
        return LimitSample(grid.points[idx], T, resolution, frac, regime, int(seed), history)
    raise UnconvergedError(regime, history)


def scale_correct_spec(raw_argmin, sigma: float, beta0: float, H: float):
    """Map unit-law draws to the correct-spec limit: multiply by ``(sigma/|beta0|)^(1/H)``."""
    if beta0 == 0:
        raise ValueError("beta0 = 0: limit law undefined")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    factor = (sigma / abs(beta0)) ** (1.0 / H)
    if np.ndim(raw_argmin):
        return np.asarray(raw_argmin, dtype=float) * factor
    return float(raw_argmin) * factor


# quantile tables -----------------------------------------------------------


def _key(family: str, H: float, alpha: float) -> tuple[str, float, float]:
    return family, round(float(H), 12), round(float(alpha), 12)


@dataclass
class QuantileTable:
    """Upper quantiles ``z`` of unit limit laws keyed by (family, H, alpha)."""

    entries: dict = field(default_factory=dict)

    def add(self, family: str, H: float, alpha: float, z: float, draws: int, seed: int) -> None:
        self.entries[_key(family, H, alpha)] = {"z": float(z), "draws": int(draws), "seed": int(seed)}

    def lookup(self, H: float, alpha: float, family: str = "CorrectSpec") -> float:
        """Exact-key lookup; raises ``KeyError`` rather than interpolating."""
        try:
            return self.entries[_key(family, H, alpha)]["z"]
        except KeyError:
            raise KeyError(f"no quantile for family={family}, H={H}, alpha={alpha}") from None

    def __contains__(self, key) -> bool:
        H, alpha, *rest = key
        return _key(rest[0] if rest else "CorrectSpec", H, alpha) in self.entries

    def interpolate_H(self, H: float, alpha: float, family: str = "CorrectSpec") -> float:
        """Linear interpolation in H between the nearest tabulated neighbours."""
        hs = sorted(h for f, h, a in self.entries if f == family and a == round(alpha, 12))
        if not hs or not hs[0] <= H <= hs[-1]:
            raise KeyError(f"H={H} outside tabulated range for alpha={alpha}")
        j = int(np.searchsorted(hs, H))
        if hs[j] == H:
            return self.lookup(H, alpha, family)
        h0, h1 = hs[j - 1], hs[j]
        z0, z1 = self.lookup(h0, alpha, family), self.lookup(h1, alpha, family)
        return z0 + (z1 - z0) * (H - h0) / (h1 - h0)

    def rows(self) -> list[list]:
        return [[f, repr(h), repr(a), repr(v["z"]), v["draws"], v["seed"]]
                for (f, h, a), v in sorted(self.entries.items())]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["regime", "H", "alpha", "z", "draws", "seed"])
            w.writerows(self.rows())

    @classmethod
    def from_csv(cls, path) -> "QuantileTable":
        table = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                table.add(row["regime"], float(row["H"]), float(row["alpha"]), float(row["z"]),
                          int(row["draws"]), int(row["seed"]))
        return table

    def __eq__(self, other) -> bool:
        return isinstance(other, QuantileTable) and self.entries == other.entries


def quantile_table(H_list, alpha_list, family: str = "CorrectSpec", draws: int = 100_000,
                   rng=0, T: float = DEFAULT_T, resolution: float = DEFAULT_RESOLUTION,
                   workers: int = 1) -> QuantileTable:
    """Simulate the unit law of ``family`` once per H and tabulate upper quantiles."""
    seed = rng if isinstance(rng, (int, np.integer)) else child_seed(rng)
    for a in alpha_list:
        if not 0.0 < a < 0.5:
            raise ValueError("alpha must lie in (0, 0.5)")
    table = QuantileTable()
    for i, H in enumerate(H_list):
        regime = LimitRegime(family, H).unit()
        sample = simulate_argmin(regime, draws, T, resolution, int(seed) + i, workers)
        for a in alpha_list:
            table.add(family, H, a, sample.upper_quantile(a), draws, int(seed) + i)
    return table


def wald_ci(fit: FitResult, H: float, n: int, level: float, table: QuantileTable,
            span: tuple[float, float] = (0.0, 1.0)) -> ConfidenceInterval:
    """``theta_hat +- (sigma_hat / (|beta_hat| sqrt(n)))^(1/H) z_{H, (1-level)/2}``, clipped to ``span``."""
    if fit.beta_hat == 0:
        raise ValueError("beta_hat = 0: Wald interval width undefined")
    z = table.lookup(H, (1.0 - level) / 2.0)
    half = (fit.sigma_hat / (abs(fit.beta_hat) * math.sqrt(n))) ** (1.0 / H) * z
    lo = max(fit.theta_hat - half, span[0])
    hi = min(fit.theta_hat + half, span[1])
    return ConfidenceInterval(float(lo), float(hi), level, "Wald")

