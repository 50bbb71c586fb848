"""Entropy-plus-interface energy, its bounds, its metric slope and convexity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .measures import Measure, ModelParams, QuantileRep, boundary_traces
from .transport import common_quantiles, require_regular

#: discrete Fisher sums above this are reported as an infinite slope
SLOPE_OVERFLOW = 1e12


@dataclass(frozen=True)
class EnergyReport:
    total: float
    entropy_part: float
    interface_part: float
    slope: float


def entropy(mu: Measure) -> float:
    """``int rho log rho`` with ``0 log 0 = 0``.

    On a :class:`QuantileRep` this is the Lagrangian form
    ``sum dm * log(dm / gap)``, exact for the piecewise-constant density.
    """
    if isinstance(mu, QuantileRep):
        return float(mu.dm * np.sum(np.log(mu.dm / mu.gaps)))
    rho = mu.rho
    pos = rho > 0
    return float(mu.dx * np.sum(rho[pos] * np.log(rho[pos])))


def energy_value(mu: Measure, params: ModelParams) -> float:
    return entropy(mu) + params.alpha * (mu.R - mu.L)


def energy(mu: Measure, params: ModelParams) -> EnergyReport:
    ent = entropy(mu)
    iface = params.alpha * (mu.R - mu.L)
    return EnergyReport(total=ent + iface, entropy_part=ent, interface_part=iface, slope=slope(mu, params))


def energy_lower_bound(params: ModelParams) -> float:
    return float(np.log(params.alpha) + 1.0)


def diameter_bound(M: float, params: ModelParams) -> float:
    """Largest ``x`` with ``-log x + alpha x <= M``; bounds ``R - L`` at energy ``M``."""
    a = params.alpha
    floor = energy_lower_bound(params)
    if M < floor - 1e-12:
        raise ValueError(f"M={M} is below the minimal energy {floor}")

    def f(x):
        return -np.log(x) + a * x - M

    lo = 1.0 / a
    if f(lo) >= 0.0:
        return lo
    hi = 2.0 * lo
    while f(hi) < 0.0:
        hi *= 2.0
    return float(bisect(f, lo, hi, xtol=1e-12, rtol=4 * np.finfo(float).eps, maxiter=500))


def fisher_sum(mu: Measure, params: ModelParams) -> float:
    """Squared slope: ``int rho_x^2 / rho`` plus the two boundary terms."""
    if isinstance(mu, QuantileRep):
        # in mass coordinates int rho_x^2 / rho dx = int rho_m^2 dm
        rho = mu.densities
        interior = float(np.sum(np.diff(rho) ** 2) / mu.dm)
    else:
        rho, dx = mu.rho, mu.dx
        grad = np.gradient(rho, dx)
        if np.any((rho <= 0) & (grad != 0)):
            return np.inf
        pos = rho > 0
        interior = float(dx * np.sum(grad[pos] ** 2 / rho[pos]))
    tl, tr = boundary_traces(mu)
    return interior + ((tl - params.alpha) ** 2 + (tr - params.alpha) ** 2) / mu.beta


def slope(mu: Measure, params: ModelParams) -> float:
    """Metric slope of the energy; ``inf`` once the discrete sum overflows the guard."""
    s = fisher_sum(mu, params)
    if not np.isfinite(s) or s > SLOPE_OVERFLOW:
        return np.inf
    return float(np.sqrt(s))


def displacement_convexity_gap(mu0: Measure, mu1: Measure, params: ModelParams) -> float:
    """``E(mu1) - E(mu0) - [int (1 - phi'') rho0 + alpha (R1 - R0 - L1 + L0)]``.

    Both energies and ``phi''`` are taken on the shared quantile
    representation, where ``phi''`` is the ratio of matching cell widths.
    """
    require_regular(mu1)
    q0, q1 = common_quantiles(mu0, mu1)
    lhs = energy_value(q1, params) - energy_value(q0, params)
    ratio = q1.gaps / q0.gaps
    rhs = q0.dm * np.sum(1.0 - ratio) + params.alpha * (q1.R - q0.R - q1.L + q0.L)
    return float(lhs - rhs)
