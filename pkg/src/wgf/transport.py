"""Quadratic-cost optimal transport between elements of the state space.

In one dimension the optimal plan for the interior densities is the monotone
rearrangement, so everything reduces to comparing quantile functions. The two
atoms are transported to each other (left to left, right to right), which
gives the three-term decomposition used by :func:`w2`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidMeasureError, NotRegularError
from .measures import Measure, QuantileRep, gauss_points, is_regular, quantile_function, to_quantile

#: sub-intervals per quantile cell on which the potential is sampled
PHI_REFINE = 4


@dataclass(frozen=True, eq=False)
class TransportResult:
    """Distance, monotone map and dual potentials between two measures.

    ``map_nodes``, ``phi_nodes`` and ``phi_star_nodes`` are ``(k, 2)`` arrays of
    ``(x, value)`` pairs sorted by ``x``. ``dual_value`` is the assembled
    Kantorovich dual sum; it is ``None`` when only the map was requested.
    """

    w2_squared: float
    map_nodes: np.ndarray
    phi_nodes: Optional[np.ndarray] = None
    phi_star_nodes: Optional[np.ndarray] = None
    dual_value: Optional[float] = None


def common_quantiles(mu0: Measure, mu1: Measure, n: int | None = None) -> tuple[QuantileRep, QuantileRep]:
    """Quantile representations of both measures on a shared set of mass levels."""
    if not np.isclose(mu0.beta, mu1.beta, rtol=1e-12, atol=0.0):
        raise InvalidMeasureError(f"atom weights differ: {mu0.beta} vs {mu1.beta}")
    if n is None:
        n = max(mu0.N, mu1.N)
    return to_quantile(mu0, n), to_quantile(mu1, n)


def w2_density(rho0: Measure, rho1: Measure, N: int) -> float:
    """Squared distance between the interior densities.

    Composite midpoint rule on ``N`` quantile cells: the quantile functions are
    sampled at the mass levels ``(i + 1/2) / N``.
    """
    m = (np.arange(N) + 0.5) / N
    d = quantile_function(rho0, m) - quantile_function(rho1, m)
    return float(np.dot(d, d) / N)


def w2_squared(mu0: Measure, mu1: Measure) -> float:
    q0, q1 = common_quantiles(mu0, mu1)
    beta = q0.beta
    interior = w2_density(q0, q1, q0.N)
    return beta * (q0.L - q1.L) ** 2 + interior + beta * (q0.R - q1.R) ** 2


def w2(mu0: Measure, mu1: Measure) -> float:
    """Wasserstein distance ``sqrt(beta dL^2 + W2^2(rho0, rho1) + beta dR^2)``."""
    return float(np.sqrt(w2_squared(mu0, mu1)))


def require_regular(mu: Measure):
    if not is_regular(mu):
        raise NotRegularError("target measure must have a density bounded away from zero on [L, R]")


def _map_nodes(q0: QuantileRep, q1: QuantileRep) -> np.ndarray:
    xs = [q0.X]
    ys = [q1.X]
    # constant extension outside the support of rho0
    if q0.L < q0.X[0]:
        xs.insert(0, [q0.L])
        ys.insert(0, [q1.L])
    if q0.R > q0.X[-1]:
        xs.append([q0.R])
        ys.append([q1.R])
    return np.column_stack([np.concatenate(xs), np.concatenate(ys)])


def optimal_map(mu0: Measure, mu1: Measure) -> TransportResult:
    """Monotone map ``T = X1 o F0`` with ``T(L0) = L1`` and ``T(R0) = R1``.

    Between consecutive quantile nodes of ``mu0`` the map is linear. Outside
    the support of ``rho0`` it is constant, equal to ``L1`` on the left and
    ``R1`` on the right.
    """
    require_regular(mu1)
    q0, q1 = common_quantiles(mu0, mu1)
    return TransportResult(w2_squared=w2_squared(q0, q1), map_nodes=_map_nodes(q0, q1))


def apply_map(result: TransportResult, x) -> np.ndarray:
    nodes = result.map_nodes
    return np.interp(x, nodes[:, 0], nodes[:, 1])


def pushforward(mu0: Measure, result: TransportResult) -> QuantileRep:
    """Image of ``mu0`` under the map of ``result``."""
    n = result.map_nodes.shape[0]
    q0 = to_quantile(mu0, max(mu0.N, n))
    X = apply_map(result, q0.X)
    L, R = apply_map(result, [q0.L, q0.R])
    return QuantileRep(L, R, X, q0.beta)


class _Potential:
    """Convex potential with derivative equal to the monotone map.

    Piecewise quadratic on the quantile cells of the source, affine with
    slopes ``L1`` and ``R1`` outside them, and zero at the first node.
    """

    def __init__(self, q0: QuantileRep, q1: QuantileRep):
        self.x = q0.X
        self.y = q1.X
        self.slope_left = q1.L
        self.slope_right = q1.R
        g = np.diff(self.x)
        self.values = np.concatenate([[0.0], np.cumsum(0.5 * g * (self.y[1:] + self.y[:-1]))])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        X, Y, V = self.x, self.y, self.values
        k = np.clip(np.searchsorted(X, x, side="right") - 1, 0, X.size - 2)
        g = X[k + 1] - X[k]
        t = (x - X[k]) / g
        inside = V[k] + g * t * (Y[k] + 0.5 * t * (Y[k + 1] - Y[k]))
        left = self.slope_left * (x - X[0])
        right = V[-1] + self.slope_right * (x - X[-1])
        return np.where(x < X[0], left, np.where(x > X[-1], right, inside))

    def conjugate(self, y) -> np.ndarray:
        """Exact ``phi*(y) = x y - phi(x)`` at the point where ``y`` is a subgradient.

        ``phi'`` is linear from ``y_k`` to ``y_{k+1}`` on cell ``k``; the kinks
        at the end nodes cover ``[L1, y_0]`` and ``[y_N, R1]``. Outside
        ``[L1, R1]`` the conjugate is infinite.
        """
        y = np.asarray(y, dtype=float)
        X, Y = self.x, self.y
        k = np.clip(np.searchsorted(Y, y, side="right") - 1, 0, X.size - 2)
        t = np.clip((y - Y[k]) / (Y[k + 1] - Y[k]), 0.0, 1.0)
        x = X[k] + t * (X[k + 1] - X[k])
        out = x * y - self(x)
        out = np.where((y < self.slope_left) | (y > self.slope_right), np.inf, out)
        return out

    def grid(self, extra=()) -> np.ndarray:
        t = np.arange(PHI_REFINE) / PHI_REFINE
        pts = (self.x[:-1, None] + np.diff(self.x)[:, None] * t[None, :]).ravel()
        return np.unique(np.concatenate([pts, [self.x[-1]], np.asarray(extra, dtype=float)]))


def legendre_transform(x: np.ndarray, phi: np.ndarray, y) -> np.ndarray:
    """Discrete conjugate ``max_k (x_k y - phi_k)`` of samples on a sorted grid.

    For convex samples the maximizer is located by bisection on the chord
    slopes; otherwise every grid point is scanned.
    """
    y = np.asarray(y, dtype=float)
    slopes = np.diff(phi) / np.diff(x)
    if np.all(np.diff(slopes) >= -1e-12 * (1.0 + np.abs(slopes[1:]))):
        k = np.searchsorted(slopes, y)
        return x[k] * y - phi[k]
    out = np.empty(y.shape)
    flat_y, flat_out = y.ravel(), out.ravel()
    for start in range(0, flat_y.size, 256):
        chunk = flat_y[start:start + 256]
        flat_out[start:start + 256] = np.max(np.outer(chunk, x) - phi[None, :], axis=1)
    return out


def kantorovich_potential(mu0: Measure, mu1: Measure) -> TransportResult:
    """Dual potentials ``phi``, ``phi*`` and the assembled dual sum.

    ``dual_value`` is ``int (x^2/2 - phi) dmu0 + int (y^2/2 - phi*) dmu1``,
    which equals half the squared distance up to quadrature error. The
    conjugate is evaluated in closed form from the piecewise-quadratic
    ``phi``; :func:`legendre_transform` of the sampled ``phi`` agrees with it
    to the square of the sampling width.
    """
    require_regular(mu1)
    q0, q1 = common_quantiles(mu0, mu1)
    pot = _Potential(q0, q1)
    xg = pot.grid(extra=[q0.L, q0.R])
    phig = pot(xg)
    phi_star = pot.conjugate

    beta = q0.beta
    p0, w0 = gauss_points(q0)
    p1, w1 = gauss_points(q1)
    ends0 = np.array([q0.L, q0.R])
    ends1 = np.array([q1.L, q1.R])
    part0 = np.dot(w0, 0.5 * p0**2 - pot(p0)) + beta * np.sum(0.5 * ends0**2 - pot(ends0))
    part1 = np.dot(w1, 0.5 * p1**2 - phi_star(p1)) + beta * np.sum(0.5 * ends1**2 - phi_star(ends1))

    t = np.arange(PHI_REFINE) / PHI_REFINE
    yg = (q1.X[:-1, None] + np.diff(q1.X)[:, None] * t[None, :]).ravel()
    yg = np.unique(np.concatenate([yg, [q1.X[-1], q1.L, q1.R]]))
    return TransportResult(
        w2_squared=w2_squared(q0, q1),
        map_nodes=_map_nodes(q0, q1),
        phi_nodes=np.column_stack([xg, phig]),
        phi_star_nodes=np.column_stack([yg, phi_star(yg)]),
        dual_value=float(part0 + part1),
    )


def check_monotone_support(map_nodes, tol: float = 0.0) -> bool:
    """True iff ``(x1 - x2)(y1 - y2) >= 0`` for every pair of nodes."""
    nodes = np.asarray(map_nodes, dtype=float).reshape(-1, 2)
    if nodes.shape[0] < 2:
        return True
    order = np.lexsort((nodes[:, 1], nodes[:, 0]))
    x, y = nodes[order, 0], nodes[order, 1]
    starts = np.flatnonzero(np.concatenate([[True], np.diff(x) > 0]))
    group_min = np.minimum.reduceat(y, starts)
    group_max = np.maximum.reduceat(y, starts)
    # every y at a strictly larger x must dominate all y seen before
    running = np.maximum.accumulate(group_max)
    return bool(np.all(group_min[1:] >= running[:-1] - tol))
