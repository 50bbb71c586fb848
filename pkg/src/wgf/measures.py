"""Elements of the state space: a density on [L, R] plus two atoms of weight beta.

Two parametrizations are used throughout:

* :class:`GMeasure` stores cell averages of the density on a uniform partition
  of ``[L, R]``.
* :class:`QuantileRep` stores the monotone quantile map ``X(m)`` of the
  interior density at the uniform mass levels ``m_i = i / N``. Between the
  nodes ``X`` is linear, i.e. the density is constant on each quantile cell.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import InvalidMeasureError

MASS_TOL = 1e-10

# 3-point Gauss-Legendre rule on [0, 1]
_GL_NODES = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
_GL_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ModelParams:
    """Physical constants: threshold volume fraction and kinetic coefficient."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"{name} must be a finite positive number, got {v!r}")


@dataclass(frozen=True, eq=False)
class GMeasure:
    """``rho * Lebesgue + beta * delta_L + beta * delta_R`` with cell-averaged ``rho``."""

    L: float
    R: float
    rho: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "rho", _frozen(self.rho))
        if not (np.isfinite(self.L) and np.isfinite(self.R)) or self.L >= self.R:
            raise InvalidMeasureError(f"need L < R, got L={self.L}, R={self.R}")
        if self.rho.ndim != 1 or self.rho.size < 2:
            raise InvalidMeasureError("rho must be a 1-D array with at least 2 cells")
        if not np.all(np.isfinite(self.rho)) or np.any(self.rho < 0):
            raise InvalidMeasureError("rho must be finite and nonnegative")
        if self.beta <= 0:
            raise InvalidMeasureError("beta must be positive")
        m = self.rho.sum() * self.dx
        if abs(m - 1.0) > MASS_TOL:
            raise InvalidMeasureError(f"interior mass must be 1, got {m!r}")

    @classmethod
    def from_density(cls, L, R, rho, beta) -> "GMeasure":
        """Build from unnormalized cell values; the interior mass is rescaled to 1."""
        rho = np.asarray(rho, dtype=float)
        total = rho.sum() * (R - L) / rho.size
        if not total > 0:
            raise InvalidMeasureError("density has no mass")
        return cls(L, R, rho / total, beta)

    @classmethod
    def from_function(cls, f: Callable, L, R, N: int, beta) -> "GMeasure":
        """Cell averages of ``f`` on ``N`` uniform cells, normalized to unit mass."""
        edges = np.linspace(L, R, N + 1)
        dx = edges[1] - edges[0]
        pts = edges[:-1, None] + dx * _GL_NODES[None, :]
        avg = f(pts) @ _GL_WEIGHTS
        return cls.from_density(L, R, avg, beta)

    @property
    def N(self) -> int:
        return self.rho.size

    @property
    def dx(self) -> float:
        return (self.R - self.L) / self.rho.size

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.L, self.R, self.N + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    def cdf_at_edges(self) -> np.ndarray:
        c = np.concatenate([[0.0], np.cumsum(self.rho) * self.dx])
        return c / c[-1]


@dataclass(frozen=True, eq=False)
class QuantileRep:
    """Quantile nodes ``X_0 < ... < X_N`` at mass levels ``i / N`` plus the atom positions."""

    L: float
    R: float
    X: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "X", _frozen(self.X))
        X = self.X
        if X.ndim != 1 or X.size < 3:
            raise InvalidMeasureError("X must be a 1-D array with at least 3 nodes")
        if not np.all(np.isfinite(X)):
            raise InvalidMeasureError("X must be finite")
        if np.any(np.diff(X) <= 0):
            raise InvalidMeasureError("quantile nodes must be strictly increasing")
        scale = max(1.0, abs(self.L), abs(self.R))
        if self.L > X[0] + 1e-12 * scale or X[-1] > self.R + 1e-12 * scale:
            raise InvalidMeasureError("need L <= X_0 and X_N <= R")
        if self.beta <= 0:
            raise InvalidMeasureError("beta must be positive")

    @property
    def N(self) -> int:
        return self.X.size - 1

    @property
    def dm(self) -> float:
        return 1.0 / self.N

    @property
    def levels(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.N + 1)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.X)

    @property
    def densities(self) -> np.ndarray:
        """Constant density on each quantile cell ``[X_i, X_{i+1}]``."""
        return self.dm / self.gaps

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.X[1:] + self.X[:-1])


Measure = Union[GMeasure, QuantileRep]


def make_uniform(L, R, params: ModelParams, N: int) -> GMeasure:
    if not L < R:
        raise InvalidMeasureError(f"need L < R, got L={L}, R={R}")
    if N < 2:
        raise InvalidMeasureError("need N >= 2")
    return GMeasure(L, R, np.full(N, 1.0 / (R - L)), params.beta)


def make_equilibrium(params: ModelParams, N: int, center: float = 0.0) -> GMeasure:
    """The minimizer of the energy: density ``alpha`` on an interval of length ``1/alpha``."""
    half = 0.5 / params.alpha
    return make_uniform(center - half, center + half, params, N)


def gauss_points(mu: Measure):
    """Quadrature nodes and weights (in mass) for the interior density.

    Uses the 3-point Gauss rule per cell, so integrals of polynomials up to
    degree 5 against the piecewise-constant density are exact.
    """
    if isinstance(mu, QuantileRep):
        X, w = mu.X, np.full(mu.N, mu.dm)
    else:
        X, w = mu.edges, mu.rho * mu.dx
    h = np.diff(X)
    pts = X[:-1, None] + h[:, None] * _GL_NODES[None, :]
    wts = w[:, None] * _GL_WEIGHTS[None, :]
    return pts.ravel(), wts.ravel()


def integrate_against(mu: Measure, zeta: Callable) -> float:
    """``int zeta d mu``: interior density plus ``beta * (zeta(L) + zeta(R))``.

    A :class:`GMeasure` is integrated by the midpoint rule on its cells; a
    :class:`QuantileRep` by Gauss quadrature on its quantile cells.
    """
    if isinstance(mu, GMeasure):
        interior = mu.dx * float(np.dot(mu.rho, zeta(mu.centers)))
    else:
        pts, wts = gauss_points(mu)
        interior = float(np.dot(wts, zeta(pts)))
    ends = np.asarray(zeta(np.array([mu.L, mu.R])), dtype=float)
    return interior + mu.beta * float(ends.sum())


def integrate_rho_d2(mu: Measure, zeta_prime: Callable) -> float:
    """``int rho zeta''`` computed exactly cell by cell from ``zeta'``."""
    if isinstance(mu, QuantileRep):
        X, rho = mu.X, mu.densities
    else:
        X, rho = mu.edges, mu.rho
    return float(np.dot(rho, np.diff(zeta_prime(X))))


def mass(mu: Measure) -> float:
    if isinstance(mu, QuantileRep):
        # interior mass is the parametrization variable
        return 1.0
    return float(mu.rho.sum() * mu.dx)


def first_moment(mu: Measure) -> float:
    if isinstance(mu, QuantileRep):
        # exact for piecewise-linear X: the mean over a cell is its midpoint
        interior = mu.dm * float(mu.midpoints.sum())
        return interior + mu.beta * (mu.L + mu.R)
    return integrate_against(mu, lambda x: x)


def quantile_function(mu: Measure, m) -> np.ndarray:
    """Evaluate the interior quantile map at mass levels ``m`` in [0, 1]."""
    m = np.asarray(m, dtype=float)
    if isinstance(mu, QuantileRep):
        return np.interp(m, mu.levels, mu.X)
    return np.interp(m, mu.cdf_at_edges(), mu.edges)


def to_quantile(mu: Measure, n: int | None = None) -> QuantileRep:
    """Invert the piecewise-linear CDF of ``rho`` at the levels ``i / n``.

    ``n`` defaults to the number of cells of ``mu``. Raises if a cell is empty,
    since the quantile map would not be strictly increasing.
    """
    if isinstance(mu, QuantileRep):
        if n is None or n == mu.N:
            return mu
        X = quantile_function(mu, np.linspace(0.0, 1.0, n + 1))
        X[0], X[-1] = mu.X[0], mu.X[-1]
        return QuantileRep(mu.L, mu.R, X, mu.beta)
    if np.any(mu.rho <= 0):
        raise InvalidMeasureError("to_quantile needs strictly positive cell densities")
    n = mu.N if n is None else n
    X = quantile_function(mu, np.linspace(0.0, 1.0, n + 1))
    X[0], X[-1] = mu.L, mu.R
    return QuantileRep(mu.L, mu.R, X, mu.beta)


def from_quantile(q: QuantileRep, n: int | None = None) -> GMeasure:
    """Resample the quantile-cell density onto ``n`` uniform cells of ``[L, R]``."""
    n = q.N if n is None else n
    edges = np.linspace(q.L, q.R, n + 1)
    cdf = np.interp(edges, q.X, q.levels, left=0.0, right=1.0)
    rho = np.diff(cdf) / (edges[1] - edges[0])
    return GMeasure.from_density(q.L, q.R, rho, q.beta)


def resample(mu: GMeasure, n: int) -> GMeasure:
    """Conservative resampling of a :class:`GMeasure` onto ``n`` cells."""
    edges = np.linspace(mu.L, mu.R, n + 1)
    cdf = np.interp(edges, mu.edges, mu.cdf_at_edges())
    return GMeasure.from_density(mu.L, mu.R, np.diff(cdf) / (edges[1] - edges[0]), mu.beta)


def boundary_traces(mu: Measure) -> tuple[float, float]:
    """Trace values ``rho(L), rho(R)`` by linear extrapolation from the two nearest cells.

    For a :class:`QuantileRep` the extrapolation is done in the mass
    coordinate, where all cells have equal weight.
    """
    rho = mu.densities if isinstance(mu, QuantileRep) else mu.rho
    left = 1.5 * rho[0] - 0.5 * rho[1]
    right = 1.5 * rho[-1] - 0.5 * rho[-2]
    return float(left), float(right)


def regularize(mu: GMeasure, n: float = 1e3) -> GMeasure:
    """Clamp the density to ``[1/n, n]`` and renormalize."""
    return GMeasure.from_density(mu.L, mu.R, np.clip(mu.rho, 1.0 / n, n), mu.beta)


def is_regular(mu: Measure) -> bool:
    rho = mu.densities if isinstance(mu, QuantileRep) else mu.rho
    if isinstance(mu, QuantileRep):
        attached = np.isclose(mu.X[0], mu.L) and np.isclose(mu.X[-1], mu.R)
    else:
        attached = True
    return bool(attached and np.all(rho > 0) and np.all(np.isfinite(rho)))
