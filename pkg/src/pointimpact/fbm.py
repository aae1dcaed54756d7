"""Exact simulation of fractional Brownian motion on observation grids.

Two exact samplers are provided:

* :func:`sample_fbm_cholesky` factors the covariance matrix of the grid
  (any grid, one- or two-sided);
* :func:`sample_fbm_circulant` embeds the fractional Gaussian noise
  covariance in a circulant matrix (uniform grids only, O(m log m) per
  path) and falls back to Cholesky when the embedding is not usable.

The point ``t = 0`` is always pinned to zero and excluded from the
factorized matrix, which would otherwise be singular.
"""

from __future__ import annotations

import csv
import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lapack

from ._rng import as_generator

__all__ = [
    "FactorizationError",
    "FbmSpec",
    "Grid",
    "TrajectorySet",
    "cholesky_factor",
    "covariance_matrix",
    "estimate_hurst",
    "fbm_covariance",
    "sample_fbm",
    "sample_fbm_cholesky",
    "sample_fbm_circulant",
]

NEG_EIG_RTOL = 1e-8
_CIRCULANT_CHUNK = 256


class FactorizationError(np.linalg.LinAlgError):
    """Cholesky failed even after the single diagonal jitter."""

    def __init__(self, minor: int, hurst: float):
        self.minor = minor
        self.hurst = hurst
        super().__init__(
            f"covariance matrix for H={hurst} is not positive definite: "
            f"leading minor of order {minor} failed after jitter"
        )


class Grid:
    """Strictly increasing evaluation points.

    Uniformity is detected on construction: a grid is uniform when every
    spacing agrees with the mean spacing up to ``1e-12 * resolution`` plus
    a few ulps of the largest point (float64 cannot do better for fine
    grids built with ``linspace``).
    """

    __slots__ = ("points", "uniform", "resolution")

    def __init__(self, points):
        pts = np.array(points, dtype=float).ravel()
        if pts.size < 2:
            raise ValueError("a grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        diffs = np.diff(pts)
        if np.any(diffs <= 0):
            raise ValueError("grid points must be strictly increasing")
        res = float((pts[-1] - pts[0]) / (pts.size - 1))
        tol = 1e-12 * res + 8 * np.finfo(float).eps * float(np.max(np.abs(pts)))
        uniform = bool(np.max(np.abs(diffs - res)) <= tol)
        pts.setflags(write=False)
        self.points = pts
        self.uniform = uniform
        self.resolution = res if uniform else None

    @classmethod
    def linspace(cls, start: float = 0.0, stop: float = 1.0, num: int = 101) -> "Grid":
        return cls(np.linspace(start, stop, num))

    @classmethod
    def symmetric(cls, half_width: float, resolution: float) -> "Grid":
        """Uniform grid on ``[-T, T]`` through 0 with the given spacing."""
        k = int(round(half_width / resolution))
        if k < 1:
            raise ValueError("half_width must exceed the resolution")
        return cls(np.arange(-k, k + 1) * resolution)

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and np.array_equal(self.points, other.points)

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    def __repr__(self) -> str:
        kind = f"uniform, h={self.resolution:.6g}" if self.uniform else "non-uniform"
        return f"Grid({len(self)} points on [{self.points[0]:.6g}, {self.points[-1]:.6g}], {kind})"

    @property
    def span(self) -> tuple[float, float]:
        return float(self.points[0]), float(self.points[-1])

    def nearest_index(self, t: float) -> int:
        """Index of the grid point closest to ``t`` (ties go to the smaller index)."""
        lo, hi = self.span
        if not lo <= t <= hi:
            raise ValueError(f"t={t} lies outside the grid span [{lo}, {hi}]")
        return int(np.argmin(np.abs(self.points - t)))

    def zero_index(self) -> int | None:
        hits = np.flatnonzero(self.points == 0.0)
        return int(hits[0]) if hits.size else None


@dataclass(frozen=True)
class FbmSpec:
    hurst: float
    grid: Grid

    def __post_init__(self):
        _check_hurst(self.hurst)


@dataclass(eq=False)
class TrajectorySet:
    """``n`` trajectories evaluated on a common grid (row ``i`` is path ``i``)."""

    grid: Grid
    values: np.ndarray
    hurst_used: float | None = None
    seed: int | None = None
    method: str = ""
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.grid):
            raise ValueError(
                f"values must be n x {len(self.grid)}, got shape {self.values.shape}"
            )

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return self.n

    def column(self, t: float) -> np.ndarray:
        return self.values[:, self.grid.nearest_index(t)]

    def subset(self, idx) -> "TrajectorySet":
        return TrajectorySet(self.grid, self.values[idx], self.hurst_used, self.seed, self.method)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, TrajectorySet)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )

    # serialization -------------------------------------------------------

    def to_csv(self, path, ids=None) -> None:
        """Header ``t,<grid points>`` then one row per trajectory (first field is the id)."""
        ids = list(range(self.n)) if ids is None else list(ids)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", *map(repr, self.grid.points.tolist())])
            for i, row in zip(ids, self.values):
                w.writerow([i, *map(repr, row.tolist())])

    @classmethod
    def from_csv(cls, path) -> "TrajectorySet":
        ts, _ = read_trajectory_csv(path)
        return ts

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.points.tolist(),
            "hurst": self.hurst_used,
            "seed": self.seed,
            "method": self.method,
            "notes": self.notes,
            "values": self.values.tolist(),
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, d: dict) -> "TrajectorySet":
        values = np.asarray(d["values"], dtype=float).reshape(-1, len(d["grid"]))
        return cls(Grid(d["grid"]), values, d.get("hurst"), d.get("seed"), d.get("method", ""),
                   d.get("notes") or {})

    @classmethod
    def from_json(cls, path) -> "TrajectorySet":
        return cls.from_dict(json.loads(Path(path).read_text()))


def read_trajectory_csv(path) -> tuple[TrajectorySet, list[str]]:
    """Parse the trajectory CSV format, returning the set and the row ids."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty trajectory file")
    header = rows[0]
    if header[0].strip().lower() != "t":
        raise ValueError(f"{path}: header must start with 't'")
    try:
        points = [float(x) for x in header[1:]]
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric grid point in header") from exc
    grid = Grid(points)
    ids, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: ragged row ({len(row)} fields, expected {len(header)})")
        ids.append(row[0])
        values.append([float(x) for x in row[1:]])
    return TrajectorySet(grid, np.array(values, dtype=float).reshape(-1, len(grid))), ids


# covariance ----------------------------------------------------------------


def _check_hurst(H: float) -> None:
    if not (0.0 < H <= 1.0) or math.isnan(H):
        raise ValueError(f"Hurst exponent must lie in (0, 1], got {H}")


def fbm_covariance(s, t, H: float):
    """Cov(B_H(s), B_H(t)) = (|t|^2H + |s|^2H - |t-s|^2H) / 2, broadcasting over arrays."""
    _check_hurst(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    h2 = 2.0 * H
    out = 0.5 * (np.abs(t) ** h2 + np.abs(s) ** h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def covariance_matrix(points, H: float) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    return fbm_covariance(p[:, None], p[None, :], H)


_FACTOR_CACHE: dict = {}


def cholesky_factor(H: float, points) -> tuple[np.ndarray, np.ndarray]:
    """Lower Cholesky factor of the covariance at the nonzero grid points.

    Returns ``(L, mask)`` where ``mask`` selects the grid points that were
    factorized (all except an exact ``t = 0``).  One jitter of
    ``1e-12 * trace / m`` is tried on failure; a second failure raises
    :class:`FactorizationError`.
    """
    _check_hurst(H)
    pts = np.asarray(points, dtype=float)
    key = (float(H), pts.tobytes())
    hit = _FACTOR_CACHE.get(key)
    if hit is not None:
        return hit
    mask = pts != 0.0
    cov = covariance_matrix(pts[mask], H)
    L, info = lapack.dpotrf(cov, lower=1, clean=1)
    if info > 0:
        jitter = 1e-12 * np.trace(cov) / cov.shape[0]
        L, info = lapack.dpotrf(cov + jitter * np.eye(cov.shape[0]), lower=1, clean=1)
        if info > 0:
            raise FactorizationError(int(info), H)
    if info < 0:
        raise np.linalg.LinAlgError(f"dpotrf argument {-info} invalid")
    L.setflags(write=False)
    if len(_FACTOR_CACHE) > 32:
        _FACTOR_CACHE.clear()
    _FACTOR_CACHE[key] = (L, mask)
    return L, mask


# samplers ------------------------------------------------------------------


def _seed_of(rng) -> int | None:
    return int(rng) if isinstance(rng, (int, np.integer)) else None


def _linear_paths(grid: Grid, n: int, gen: np.random.Generator) -> np.ndarray:
    # B_1(t) = t Z
    z = gen.standard_normal(n)
    return z[:, None] * grid.points[None, :]


def sample_fbm_cholesky(spec: FbmSpec, n: int, rng=None) -> TrajectorySet:
    """Draw ``n`` exact fBm paths on ``spec.grid`` by Cholesky factorization."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    grid, H = spec.grid, spec.hurst
    if H == 1.0:
        vals = _linear_paths(grid, n, gen)
        return TrajectorySet(grid, vals, H, _seed_of(rng), "linear")
    L, mask = cholesky_factor(H, grid.points)
    z = gen.standard_normal((n, L.shape[0]))
    vals = np.zeros((n, len(grid)))
    vals[:, mask] = z @ L.T
    return TrajectorySet(grid, vals, H, _seed_of(rng), "cholesky")


def fgn_autocovariance(H: float, lags) -> np.ndarray:
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2.0 * H
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


@functools.lru_cache(maxsize=16)
def _circulant_eigenvalues(H: float, N: int) -> np.ndarray:
    gamma = fgn_autocovariance(H, np.arange(N + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    lam.setflags(write=False)
    return lam


def _circulant_layout(grid: Grid) -> tuple[int, int] | None:
    """Return ``(prefix, zero)`` so the extended grid starts at 0.

    ``prefix`` extra points are prepended when the grid starts to the
    right of 0; ``zero`` is the index of ``t = 0`` in the extended grid.
    ``None`` if 0 is not commensurate with the grid.
    """
    h = grid.resolution
    t0 = grid.points[0]
    k = -t0 / h
    if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)):
        return None
    k = int(round(k))
    if k >= len(grid):
        return None
    return (0, k) if k >= 0 else (-k, 0)


def sample_fbm_circulant(spec: FbmSpec, n: int, rng=None) -> TrajectorySet:
    """Draw ``n`` exact fBm paths on a uniform grid via circulant embedding.

    Increments are fractional Gaussian noise generated with the
    Davies-Harte / Wood-Chan construction; each complex FFT yields two
    independent paths.  Paths are then re-anchored so that ``B_H(0) = 0``,
    which also covers two-sided grids through the origin.  Falls back to
    :func:`sample_fbm_cholesky` (recorded in ``notes['fallback']``) when the
    grid is not commensurate with 0 or the embedding has eigenvalues below
    ``-1e-8 * max eigenvalue``.
    """
    grid, H = spec.grid, spec.hurst
    if not grid.uniform:
        raise ValueError("circulant sampler needs a uniform grid")
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    if H == 1.0:
        return TrajectorySet(grid, _linear_paths(grid, n, gen), H, _seed_of(rng), "linear")
    layout = _circulant_layout(grid)
    if layout is None:
        out = sample_fbm_cholesky(spec, n, gen)
        out.seed = _seed_of(rng)
        out.notes["fallback"] = "grid not commensurate with t=0"
        return out
    prefix, zero = layout
    N = len(grid) - 1 + prefix
    lam = _circulant_eigenvalues(H, N)
    if lam.min() < -NEG_EIG_RTOL * lam.max():
        out = sample_fbm_cholesky(spec, n, gen)
        out.seed = _seed_of(rng)
        out.notes["fallback"] = f"negative circulant eigenvalue {lam.min():.3e}"
        return out
    scale = np.sqrt(np.clip(lam, 0.0, None) / (2 * N))
    h_pow = grid.resolution**H
    vals = np.empty((n, len(grid)))
    pairs = (n + 1) // 2
    row = 0
    for start in range(0, pairs, _CIRCULANT_CHUNK):
        p = min(_CIRCULANT_CHUNK, pairs - start)
        z = gen.standard_normal((p, 2, 2 * N))
        w = np.fft.fft(scale * (z[:, 0] + 1j * z[:, 1]), axis=1)[:, :N]
        incr = np.concatenate([w.real, w.imag], axis=0) * h_pow
        # interleave so path order does not depend on the chunk size
        incr = incr.reshape(2, p, N).transpose(1, 0, 2).reshape(2 * p, N)
        take = min(2 * p, n - row)
        level = np.zeros((take, N + 1))
        np.cumsum(incr[:take], axis=1, out=level[:, 1:])
        level -= level[:, zero : zero + 1]
        vals[row : row + take] = level[:, prefix:]
        row += take
    return TrajectorySet(grid, vals, H, _seed_of(rng), "circulant")


def sample_fbm(spec: FbmSpec, n: int, rng=None) -> TrajectorySet:
    """Circulant sampler on uniform grids, Cholesky otherwise."""
    if spec.grid.uniform:
        return sample_fbm_circulant(spec, n, rng)
    return sample_fbm_cholesky(spec, n, rng)


# Hurst estimation ----------------------------------------------------------


def estimate_hurst(path, grid: Grid | None = None) -> float:
    """Hurst exponent from second-order discrete variations at lags 1 and 2.

    With ``V_k`` the mean of squared second differences at lag ``k``,
    ``E V_k`` scales like ``k^{2H}``, so ``H = log2(V_2 / V_1) / 2``.  The
    estimate is clipped to ``(0, 1]``; paths whose second differences vanish
    (straight lines) return 1.0.  Constant paths raise ``ValueError``.
    """
    x = np.asarray(path, dtype=float).ravel()
    if grid is not None:
        if not grid.uniform:
            raise ValueError("Hurst estimation needs a uniform grid")
        if len(grid) != x.size:
            raise ValueError("path length does not match the grid")
    if x.size < 8:
        raise ValueError("need at least 8 observations")
    d1 = np.diff(x)
    energy = float(np.dot(d1, d1))
    if energy == 0.0 or not np.isfinite(energy):
        raise ValueError("degenerate (constant or non-finite) path")
    v1 = np.mean((x[2:] - 2 * x[1:-1] + x[:-2]) ** 2)
    v2 = np.mean((x[4:] - 2 * x[2:-2] + x[:-4]) ** 2)
    if v1 <= 1e-20 * energy / d1.size:
        return 1.0
    h = 0.5 * math.log2(v2 / v1)
    return float(min(max(h, np.finfo(float).eps), 1.0))
