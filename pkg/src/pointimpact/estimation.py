"""Least-squares estimation of the sensitive time point.

For every grid point the simple regression of Y on X(theta) is solved in
closed form from centered column statistics; the estimate of theta is the
grid point with the smallest residual sum of squares (smallest index on
ties).  :class:`Design` caches the statistics that do not depend on Y so
that bootstrap refits only touch the responses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fbm import Grid
from .scenarios import Dataset, TwoSampleData, WeightFunction, functional_integral

__all__ = [
    "Design",
    "ExtendedFitResult",
    "FitResult",
    "TwoSampleFit",
    "fit_extended",
    "fit_point_impact",
    "fit_two_sample",
    "profile_oracle",
]

SUMMARY_FIELDS = ("theta_hat", "theta_index", "alpha_hat", "beta_hat", "sigma_hat", "sse", "n")


@dataclass(eq=False)
class FitResult:
    alpha_hat: float
    beta_hat: float
    theta_hat: float
    theta_index: int
    sse_profile: np.ndarray
    residuals: np.ndarray
    sigma_hat: float

    @property
    def n(self) -> int:
        return self.residuals.size

    @property
    def sse(self) -> float:
        return float(self.sse_profile[self.theta_index])

    def to_dict(self) -> dict:
        return {
            "alpha_hat": self.alpha_hat,
            "beta_hat": self.beta_hat,
            "theta_hat": self.theta_hat,
            "theta_index": self.theta_index,
            "sigma_hat": self.sigma_hat,
            "sse_profile": self.sse_profile.tolist(),
            "residuals": self.residuals.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(d["alpha_hat"], d["beta_hat"], d["theta_hat"], d["theta_index"],
                   np.asarray(d["sse_profile"], dtype=float), np.asarray(d["residuals"], dtype=float),
                   d["sigma_hat"])

    def summary_row(self) -> list:
        return [repr(float(getattr(self, k))) if k not in ("theta_index", "n") else str(getattr(self, k))
                for k in SUMMARY_FIELDS]

    def csv_summary(self) -> str:
        """Header line and one value line, for harness tables."""
        return ",".join(SUMMARY_FIELDS) + "\n" + ",".join(self.summary_row()) + "\n"


@dataclass(eq=False)
class ExtendedFitResult(FitResult):
    basis_coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))
    excluded: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["basis_coefficients"] = self.basis_coefficients.tolist()
        d["excluded"] = self.excluded.tolist()
        d["sse_profile"] = [None if not np.isfinite(v) else v for v in self.sse_profile]
        return d


class Design:
    """Response-free statistics of the trajectory matrix ``X`` (n x m)."""

    def __init__(self, X: np.ndarray):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be an n x m matrix")
        self.X = X
        self.n, self.m = X.shape
        self.xbar = X.mean(axis=0)
        self.Xc = X - self.xbar
        self.sxx = np.einsum("ij,ij->j", self.Xc, self.Xc)
        self.constant = np.ptp(X, axis=0) == 0.0
        self._sxx_safe = np.where(self.constant, 1.0, self.sxx)

    def profile(self, Y: np.ndarray):
        """SSE, intercept and slope for every column, batched over rows of ``Y``.

        ``Y`` is ``(n,)`` or ``(B, n)``; outputs are ``(m,)`` or ``(B, m)``.
        Constant columns get slope 0 and SSE equal to the total sum of squares.
        """
        Y = np.asarray(Y, dtype=float)
        ybar = Y.mean(axis=-1, keepdims=True)
        Yc = Y - ybar
        syy = np.einsum("...i,...i->...", Yc, Yc)[..., None]
        sxy = Yc @ self.Xc
        with np.errstate(divide="ignore", invalid="ignore"):
            beta = np.where(self.constant, 0.0, sxy / self._sxx_safe)
        sse = np.maximum(syy - beta * sxy, 0.0)
        alpha = ybar - beta * self.xbar
        return sse, alpha, beta

    def fit(self, y: np.ndarray, grid_points: np.ndarray) -> FitResult:
        y = np.asarray(y, dtype=float)
        sse, alpha, beta = self.profile(y)
        j = int(np.argmin(sse))
        a, b = float(alpha[j]), float(beta[j])
        res = y - a - b * self.X[:, j]
        return FitResult(a, b, float(grid_points[j]), j, sse, res, float(np.sqrt(res @ res / y.size)))


def _unpack(data, y=None, grid=None):
    if isinstance(data, Dataset):
        return data.X, data.y, data.grid.points
    X = np.asarray(getattr(data, "values", data), dtype=float)
    if grid is None:
        grid = getattr(data, "grid", None)
    pts = grid.points if isinstance(grid, Grid) else (np.arange(X.shape[1], dtype=float) if grid is None else np.asarray(grid))
    return X, np.asarray(y, dtype=float), pts


def _check(X, y):
    if y.size != X.shape[0]:
        raise ValueError("response count does not match trajectory count")
    if y.size < 3:
        raise ValueError(f"need n >= 3 observations, got {y.size}")


def fit_point_impact(data, y=None, grid=None) -> FitResult:
    """Profile least-squares fit of ``Y = alpha + beta X(theta) + eps`` over the grid.

    ``data`` is a :class:`Dataset`, or a trajectory matrix / ``TrajectorySet``
    together with ``y``.  ``sigma_hat = sqrt(SSE / n)``.
    """
    X, y, pts = _unpack(data, y, grid)
    _check(X, y)
    design = Design(X)
    if design.constant.all():
        raise ValueError("every grid column is constant: slope not identifiable")
    return design.fit(y, pts)


def profile_oracle(X, y):
    """Per-column SSE, intercept, slope by explicit 2x2 normal-equation inversion."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, m = X.shape
    sse, alpha, beta = np.empty(m), np.empty(m), np.empty(m)
    for j in range(m):
        x = X[:, j]
        if np.ptp(x) == 0.0:
            alpha[j], beta[j] = y.mean(), 0.0
        else:
            A = np.array([[n, x.sum()], [x.sum(), x @ x]])
            rhs = np.array([y.sum(), x @ y])
            alpha[j], beta[j] = np.linalg.inv(A) @ rhs
        r = y - alpha[j] - beta[j] * x
        sse[j] = r @ r
    return sse, alpha, beta


def fit_extended(data, basis: list[WeightFunction], y=None, grid=None) -> ExtendedFitResult:
    """Profile fit of ``Y = alpha + beta X(theta) + sum_j beta_j Z_j + eps``.

    ``Z_j`` is the trapezoidal integral of ``basis[j] * X``.  Grid points
    where ``X(theta)`` is (numerically) in the span of ``[1, Z]`` are
    excluded from the profile (SSE = inf) and listed in ``excluded``.
    """
    X, y, pts = _unpack(data, y, grid)
    g = data.grid if isinstance(data, Dataset) else Grid(pts)
    k = len(basis)
    if y.size <= k + 2:
        raise ValueError(f"need n > {k + 2} observations for {k} basis functions")
    _check(X, y)
    if k == 0:
        fit = fit_point_impact(X, y, g)
        return ExtendedFitResult(**fit.__dict__)
    Z = np.column_stack([functional_integral(X, phi, g) for phi in basis])
    W = np.column_stack([np.ones(y.size), Z])
    Q, R = np.linalg.qr(W)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * diag.max():
        raise ValueError("basis covariates are collinear: design rank-deficient at every grid point")
    ry = y - Q @ (Q.T @ y)
    RX = X - Q @ (Q.T @ X)
    rxx = np.einsum("ij,ij->j", RX, RX)
    Xc = X - X.mean(axis=0)
    scale = np.einsum("ij,ij->j", Xc, Xc)
    bad = rxx <= 1e-10 * np.maximum(scale, np.finfo(float).tiny)
    if bad.all():
        raise ValueError("design rank-deficient at every grid point")
    rxy = ry @ RX
    beta = np.where(bad, 0.0, rxy / np.where(bad, 1.0, rxx))
    sse = np.where(bad, np.inf, np.maximum(ry @ ry - beta * rxy, 0.0))
    j = int(np.argmin(sse))
    full = np.column_stack([np.ones(y.size), X[:, j], Z])
    coef, *_ = np.linalg.lstsq(full, y, rcond=None)
    res = y - full @ coef
    return ExtendedFitResult(
        float(coef[0]), float(coef[1]), float(pts[j]), j, sse, res,
        float(np.sqrt(res @ res / y.size)), coef[2:].copy(), np.flatnonzero(bad),
    )


@dataclass(eq=False)
class TwoSampleFit:
    theta_hat: float
    theta_index: int
    profile: np.ndarray

    def to_dict(self) -> dict:
        return {"theta_hat": self.theta_hat, "theta_index": self.theta_index,
                "profile": self.profile.tolist()}


def fit_two_sample(data: TwoSampleData) -> TwoSampleFit:
    """Grid argmax of the difference of group sample means."""
    if data.group1.n < 1 or data.group2.n < 1:
        raise ValueError("both groups must be nonempty")
    profile = data.group1.values.mean(axis=0) - data.group2.values.mean(axis=0)
    j = int(np.argmax(profile))
    return TwoSampleFit(float(data.grid.points[j]), j, profile)
