"""Minimizing-movement time stepping in quantile coordinates.

Each step minimizes ``W2^2(sigma, mu) / (2h) + E(mu)`` over the quantile nodes
``X_0 < ... < X_N`` and the atom positions ``L <= X_0``, ``X_N <= R``. In these
coordinates the squared distance is a weighted sum of squares and the entropy
is ``-sum dm log(gap / dm)``, so the objective is smooth and strictly convex
and the gap logarithms keep iterates monotone.

The atom positions enter only through ``(beta / 2h)(L - L_sigma)^2 - alpha L``
(and the mirror term for ``R``). When a constraint is inactive the atom sits
at its closed-form position ``L_sigma + alpha h / beta``; when it is active it
is glued to the end node and eliminated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solveh_banded

from .energy import energy_value
from .errors import ConvergenceError, DomainCollapseError, InvalidMeasureError
from .measures import (
    GMeasure,
    Measure,
    ModelParams,
    QuantileRep,
    from_quantile,
    integrate_against,
    integrate_rho_d2,
    to_quantile,
)
from .testfunctions import TestFunction, corpus
from .transport import w2_squared

log = logging.getLogger(__name__)

_ARMIJO = 1e-4
#: relative Newton decrement below which objective decrease is not resolvable in
#: double precision; full steps are taken there
_TINY_DECREMENT = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    h: float = 1e-3
    N: int = 256
    newton_tol: float = 1e-10
    max_iters: int = 50
    linesearch_shrink: float = 0.5

    def __post_init__(self):
        if not (self.h > 0 and np.isfinite(self.h)):
            raise ValueError(f"h must be positive, got {self.h}")
        if int(self.N) != self.N or self.N < 4:
            raise ValueError(f"N must be an integer >= 4, got {self.N}")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not 0 < self.linesearch_shrink < 1:
            raise ValueError("linesearch_shrink must lie in (0, 1)")


@dataclass(frozen=True)
class StepDiagnostics:
    w2_sq_step: float
    energy_before: float
    energy_after: float
    newton_iters: int
    el_residual_max: float
    active_constraints: tuple[bool, bool]
    grad_norm: float = 0.0
    objective_history: tuple = ()


@dataclass
class Trajectory:
    """Snapshots ``states[k]`` at ``times[k]`` with per-step diagnostics.

    ``quantiles`` holds the quantile representation actually evolved by the
    minimizing-movement scheme; it is ``None`` for trajectories produced by
    other solvers. Metric diagnostics use it when present.
    """

    times: np.ndarray
    states: list
    diagnostics: list
    params: ModelParams
    config: object
    quantiles: Optional[list] = None
    kind: str = "jko"
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.states)

    def measure(self, k: int) -> Measure:
        return self.quantiles[k] if self.quantiles is not None else self.states[k]

    def measures(self) -> list:
        return list(self.quantiles) if self.quantiles is not None else list(self.states)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


def _check_extent(L: float, R: float):
    if R - L < 10 * np.finfo(float).eps * max(1.0, abs(L), abs(R)):
        raise DomainCollapseError(f"domain collapsed: L={L!r}, R={R!r}")


def jko_objective(q: QuantileRep, sigma: QuantileRep, h: float, params: ModelParams) -> float:
    """Discrete ``W2^2(sigma, q) / (2h) + E(q)`` with midpoint quantile differences."""
    if q.N != sigma.N:
        raise InvalidMeasureError(f"node counts differ: {q.N} vs {sigma.N}")
    if not np.isclose(q.beta, sigma.beta, rtol=1e-12, atol=0.0):
        raise InvalidMeasureError("atom weights differ")
    if np.any(np.diff(q.X) <= 0):
        raise InvalidMeasureError("quantile nodes must be strictly increasing")
    dbar = q.midpoints - sigma.midpoints
    transport = q.beta * (q.L - sigma.L) ** 2 + q.dm * np.dot(dbar, dbar) + q.beta * (q.R - sigma.R) ** 2
    return float(transport / (2 * h) + energy_value(q, params))


class _StepProblem:
    """Objective, gradient and banded Hessian for one step with fixed pins."""

    def __init__(self, sigma: QuantileRep, h: float, params: ModelParams, pin_l: bool, pin_r: bool):
        self.Xs = np.asarray(sigma.X)
        self.Xs_bar = sigma.midpoints
        self.Ls, self.Rs = sigma.L, sigma.R
        self.beta, self.alpha, self.h = sigma.beta, params.alpha, h
        self.dm = sigma.dm
        self.pin_l, self.pin_r = pin_l, pin_r
        self.L_free = self.Ls + self.alpha * h / self.beta
        self.R_free = self.Rs - self.alpha * h / self.beta

    def ends(self, X) -> tuple[float, float]:
        L = X[0] if self.pin_l else self.L_free
        R = X[-1] if self.pin_r else self.R_free
        return L, R

    def objective(self, X) -> float:
        L, R = self.ends(X)
        g = np.diff(X)
        dbar = 0.5 * (X[1:] + X[:-1]) - self.Xs_bar
        transport = self.beta * (L - self.Ls) ** 2 + self.dm * np.dot(dbar, dbar) + self.beta * (R - self.Rs) ** 2
        return transport / (2 * self.h) - self.dm * np.sum(np.log(g / self.dm)) + self.alpha * (R - L)

    def gradient(self, X) -> np.ndarray:
        dm, h = self.dm, self.h
        dbar = 0.5 * (X[1:] + X[:-1]) - self.Xs_bar
        rho = dm / np.diff(X)
        grad = np.zeros_like(X)
        grad[:-1] += (dm / (2 * h)) * dbar
        grad[1:] += (dm / (2 * h)) * dbar
        grad[:-1] += rho
        grad[1:] -= rho
        if self.pin_l:
            grad[0] += (self.beta / h) * (X[0] - self.Ls) - self.alpha
        if self.pin_r:
            grad[-1] += (self.beta / h) * (X[-1] - self.Rs) + self.alpha
        return grad

    def hessian_banded(self, X) -> np.ndarray:
        n = X.size
        c = self.dm / (4 * self.h)
        w = self.dm / np.diff(X) ** 2
        ab = np.zeros((2, n))
        diag = np.full(n, 2 * c)
        diag[0] = diag[-1] = c
        diag[:-1] += w
        diag[1:] += w
        if self.pin_l:
            diag[0] += self.beta / self.h
        if self.pin_r:
            diag[-1] += self.beta / self.h
        ab[1] = diag
        ab[0, 1:] = c - w
        return ab

    def multipliers(self, X) -> tuple[float, float]:
        """Lagrange multipliers of ``L <= X_0`` and ``X_N <= R`` at pinned ends."""
        lam_l = self.alpha - (self.beta / self.h) * (X[0] - self.Ls)
        lam_r = (self.beta / self.h) * (X[-1] - self.Rs) + self.alpha
        return lam_l, lam_r


def _newton(problem: _StepProblem, X0: np.ndarray, cfg: SolverConfig):
    X = np.array(X0, dtype=float)
    J = problem.objective(X)
    history = [J]
    for it in range(cfg.max_iters + 1):
        g = problem.gradient(X)
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= cfg.newton_tol:
            return X, it, gnorm, history
        if it == cfg.max_iters:
            break
        d = -solveh_banded(problem.hessian_banded(X), g, check_finite=False)
        decrement = -float(np.dot(g, d))
        t = 1.0
        while True:
            Xn = X + t * d
            if np.all(np.diff(Xn) > 0):
                Jn = problem.objective(Xn)
                if decrement < _TINY_DECREMENT * max(1.0, abs(J)) or Jn <= J - _ARMIJO * t * decrement:
                    break
            t *= cfg.linesearch_shrink
            if t < 1e-30:
                raise ConvergenceError("line search failed to find a monotone descent step", X, gnorm)
        X, J = Xn, Jn
        history.append(J)
    raise ConvergenceError(
        f"Newton did not reach gradient tolerance {cfg.newton_tol:g} in {cfg.max_iters} iterations "
        f"(gradient norm {gnorm:.3e})",
        X,
        gnorm,
    )


def jko_step_quantile(
    sigma: QuantileRep,
    params: ModelParams,
    cfg: SolverConfig,
    initial: Optional[np.ndarray] = None,
    test_functions: Optional[Sequence[TestFunction]] = None,
) -> tuple[QuantileRep, StepDiagnostics]:
    """One minimizing-movement step from ``sigma`` at its own resolution."""
    _check_extent(sigma.L, sigma.R)
    h = cfg.h
    X = np.array(sigma.X if initial is None else initial, dtype=float)
    if X.shape != sigma.X.shape or np.any(np.diff(X) <= 0):
        raise InvalidMeasureError("initial iterate must be strictly increasing with N+1 nodes")
    shift = params.alpha * h / sigma.beta
    pin_l = bool(sigma.L + shift >= X[0])
    pin_r = bool(sigma.R - shift <= X[-1])

    total_iters = 0
    history: list = []
    seen = set()
    while True:
        problem = _StepProblem(sigma, h, params, pin_l, pin_r)
        X, iters, gnorm, hist = _newton(problem, X, cfg)
        total_iters += iters
        history.extend(hist)
        seen.add((pin_l, pin_r))
        lam_l, lam_r = problem.multipliers(X)
        new_l = (lam_l >= -cfg.newton_tol) if pin_l else bool(X[0] < problem.L_free)
        new_r = (lam_r >= -cfg.newton_tol) if pin_r else bool(X[-1] > problem.R_free)
        if (new_l, new_r) == (pin_l, pin_r):
            break
        if (new_l, new_r) in seen:
            raise ConvergenceError("active-set iteration cycled", X, gnorm)
        pin_l, pin_r = bool(new_l), bool(new_r)

    L, R = problem.ends(X)
    _check_extent(L, R)
    mu = QuantileRep(L, R, X, sigma.beta)
    w2sq = w2_squared(sigma, mu)
    el_max = np.nan
    if test_functions:
        el_max = max(lhs - bound for lhs, bound in (el_residual(sigma, mu, h, tf, params) for tf in test_functions))
    diag = StepDiagnostics(
        w2_sq_step=w2sq,
        energy_before=energy_value(sigma, params),
        energy_after=energy_value(mu, params),
        newton_iters=total_iters,
        el_residual_max=float(el_max),
        active_constraints=(pin_l, pin_r),
        grad_norm=gnorm,
        objective_history=tuple(history),
    )
    return mu, diag


def jko_step(
    sigma: Measure,
    params: ModelParams,
    cfg: SolverConfig,
    initial: Optional[np.ndarray] = None,
    test_functions: Optional[Sequence[TestFunction]] = None,
) -> tuple[GMeasure, StepDiagnostics]:
    """One step from ``sigma`` resolved on ``cfg.N`` quantile cells, returned as a density."""
    q = to_quantile(sigma, cfg.N)
    mu, diag = jko_step_quantile(q, params, cfg, initial, test_functions)
    return from_quantile(mu, cfg.N), diag


def el_residual(sigma: Measure, mu: Measure, h: float, zeta: TestFunction, params: ModelParams) -> tuple[float, float]:
    """Euler-Lagrange residual of a step and its a-priori bound.

    ``lhs = |(1/h) int zeta d(mu - sigma) - int rho zeta'' + alpha zeta'(R) - alpha zeta'(L)|``
    and ``bound = sup|zeta''| W2^2(sigma, mu) / (2h)``.
    """
    a = params.alpha
    change = (integrate_against(mu, zeta.zeta) - integrate_against(sigma, zeta.zeta)) / h
    diffusion = integrate_rho_d2(mu, zeta.dzeta)
    ends = zeta.dzeta(np.array([mu.L, mu.R]))
    lhs = abs(change - diffusion + a * ends[1] - a * ends[0])
    lo, hi = min(sigma.L, mu.L), max(sigma.R, mu.R)
    sup2 = zeta.sup_d2(lo, hi) if zeta.kind == "polynomial" else zeta.sup_d2()
    bound = sup2 * w2_squared(sigma, mu) / (2 * h)
    return float(lhs), float(bound)


def run_trajectory(
    mu0: Measure,
    T: float,
    params: ModelParams,
    cfg: SolverConfig,
    test_functions: Optional[Sequence[TestFunction]] = None,
    track_el: bool = True,
) -> Trajectory:
    """Iterate :func:`jko_step_quantile` ``ceil(T / h)`` times from ``mu0``."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    n_steps = int(math.ceil(T / cfg.h - 1e-9))
    q = to_quantile(mu0, cfg.N)
    if track_el and test_functions is None:
        test_functions = corpus(max(abs(q.L), abs(q.R)))
    if not track_el:
        test_functions = None
    quantiles = [q]
    diags = []
    for i in range(n_steps):
        try:
            q, d = jko_step_quantile(q, params, cfg, test_functions=test_functions)
        except ConvergenceError as e:
            raise ConvergenceError(f"step {i + 1} (t={(i + 1) * cfg.h:g}): {e}", e.last_iterate, e.grad_norm) from e
        except DomainCollapseError as e:
            raise DomainCollapseError(f"step {i + 1} (t={(i + 1) * cfg.h:g}): {e}") from e
        quantiles.append(q)
        diags.append(d)
        log.debug("step %d: W2^2=%.3e E=%.12f iters=%d", i + 1, d.w2_sq_step, d.energy_after, d.newton_iters)
    times = cfg.h * np.arange(n_steps + 1)
    states = [from_quantile(qq, cfg.N) for qq in quantiles]
    return Trajectory(times, states, diags, params, cfg, quantiles=quantiles, kind="jko")


def dissipation_sum(traj: Trajectory) -> tuple[float, float]:
    """Sum of squared step distances and ``2h(E(mu_0) - log alpha - 1)``."""
    total = float(sum(d.w2_sq_step for d in traj.diagnostics))
    e0 = energy_value(traj.measure(0), traj.params)
    bound = 2 * traj.dt * (e0 - np.log(traj.params.alpha) - 1.0)
    return total, float(bound)
