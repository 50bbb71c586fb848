"""Certification of trajectories against the inequalities and identities of the flow.

Every check is a one-sided inequality ``lhs <= rhs + tol`` recorded as a
:class:`Check`; a :class:`CertificateReport` collects them and serializes to
JSON and CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.spatial.distance import pdist, squareform

from .energy import energy_lower_bound, energy_value, slope
from .jko import SolverConfig, Trajectory, dissipation_sum, el_residual, run_trajectory
from .measures import (
    GMeasure,
    Measure,
    ModelParams,
    first_moment,
    integrate_against,
    integrate_rho_d2,
    is_regular,
    make_equilibrium,
    mass,
    quantile_function,
    regularize,
    to_quantile,
)
from .reference_pde import PdeConfig, pde_solve
from .testfunctions import TestFunction, TimeCutoff, corpus
from .transport import w2


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    tol: float
    inequality: str
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.lhs) and self.lhs <= self.rhs + self.tol)

    def as_row(self) -> dict:
        return {
            "name": self.name,
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "tol": float(self.tol),
            "pass": self.passed,
            "inequality": self.inequality,
        }


@dataclass
class CertificateReport:
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)

    def add(self, name, lhs, rhs, tol, inequality, **detail) -> Check:
        c = Check(name, float(lhs), float(rhs), float(tol), inequality, detail)
        self.checks.append(c)
        return c

    def extend(self, other: "CertificateReport"):
        self.checks.extend(other.checks)
        self.tables.update(other.tables)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps([c.as_row() for c in self.checks], indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=["name", "lhs", "rhs", "tol", "pass", "inequality"], lineterminator="\n")
        writer.writeheader()
        for c in self.checks:
            row = c.as_row()
            row.update({k: repr(row[k]) for k in ("lhs", "rhs", "tol")})
            writer.writerow(row)
        return buf.getvalue()


# --------------------------------------------------------------------------
# helpers


def _horizon_D(traj: Trajectory) -> float:
    return max(max(abs(m.L), abs(m.R)) for m in traj.states)


def _common_n(traj: Trajectory) -> int:
    return max(m.N for m in traj.measures())


def _quantile_features(measures: Sequence[Measure], n: int) -> np.ndarray:
    """Rows whose Euclidean distances are the midpoint-rule W2 distances."""
    levels = (np.arange(n) + 0.5) / n
    rows = []
    for m in measures:
        sb = math.sqrt(m.beta)
        rows.append(np.concatenate([[sb * m.L], quantile_function(m, levels) / math.sqrt(n), [sb * m.R]]))
    return np.asarray(rows)


def pairwise_w2(measures: Sequence[Measure], n: Optional[int] = None) -> np.ndarray:
    """Matrix of W2 distances between all pairs, computed in one pass."""
    n = n or max(m.N for m in measures)
    return squareform(pdist(_quantile_features(measures, n)))


def _energies(traj: Trajectory) -> np.ndarray:
    return np.array([energy_value(m, traj.params) for m in traj.measures()])


def _sigma_for(traj: Trajectory, sigma: Measure) -> Measure:
    if not is_regular(sigma) and isinstance(sigma, GMeasure):
        sigma = regularize(sigma)
    if traj.quantiles is not None:
        return to_quantile(sigma, traj.quantiles[0].N)
    return sigma


# --------------------------------------------------------------------------
# weak form


def weak_form_residual(traj: Trajectory, xi: TestFunction, params: ModelParams) -> float:
    """``|LHS - RHS|`` of the space-time weak formulation for ``xi = psi(t) zeta(x)``.

    Time integrals use the trapezoid rule on the snapshot grid. When ``xi``
    carries no time cutoff, one is built on the trajectory horizon.
    """
    t = np.asarray(traj.times, dtype=float)
    if xi.psi is None:
        xi = xi.with_time(TimeCutoff.for_horizon(t[-1]))
    a = params.alpha
    measures = traj.measures()
    zeta_int = np.array([integrate_against(m, xi.zeta) for m in measures])
    diffusion = np.array([integrate_rho_d2(m, xi.dzeta) for m in measures])
    ends = np.array([xi.dzeta(np.array([m.L, m.R])) for m in measures])
    boundary = -a * ends[:, 1] + a * ends[:, 0]
    psi, dpsi = xi.psi(t), xi.psi.derivative(t)
    lhs = -psi[0] * zeta_int[0] - trapezoid(dpsi * zeta_int, t)
    rhs = trapezoid(psi * (diffusion + boundary), t)
    return float(abs(lhs - rhs))


# --------------------------------------------------------------------------
# EVI


def _evi_terms(traj: Trajectory, sigma: Measure, params: ModelParams):
    sig = _sigma_for(traj, sigma)
    measures = traj.measures()
    n = max(m.N for m in measures + [sig])
    feats = _quantile_features(measures, n)
    fsig = _quantile_features([sig], n)[0]
    half_w2 = 0.5 * np.sum((feats - fsig) ** 2, axis=1)
    t = np.asarray(traj.times, dtype=float)
    cum_energy = cumulative_trapezoid(_energies(traj), t, initial=0.0)
    return half_w2, energy_value(sig, params), t, cum_energy


def evi_check(traj: Trajectory, sigma: Measure, t1: float, t2: float, params: ModelParams) -> float:
    """``LHS - RHS`` of the integrated evolution variational inequality between ``t1 < t2``.

    ``LHS = W2^2(mu(t2), sigma)/2 - W2^2(mu(t1), sigma)/2`` and
    ``RHS = (t2 - t1) E(sigma) - int_{t1}^{t2} E(mu(s)) ds``.
    """
    half_w2, e_sigma, t, cum = _evi_terms(traj, sigma, params)
    i = int(np.argmin(np.abs(t - t1)))
    j = int(np.argmin(np.abs(t - t2)))
    if not i < j:
        raise ValueError("need t1 < t2 on the snapshot grid")
    lhs = half_w2[j] - half_w2[i]
    rhs = (t[j] - t[i]) * e_sigma - (cum[j] - cum[i])
    return float(lhs - rhs)


def evi_max_gap(traj: Trajectory, sigma: Measure, params: ModelParams) -> float:
    """Largest EVI gap over all snapshot pairs ``t1 < t2``."""
    half_w2, e_sigma, t, cum = _evi_terms(traj, sigma, params)
    # gap(i, j) = a_j - a_i with a_k = half_w2_k - t_k E(sigma) + cum_k
    a = half_w2 - t * e_sigma + cum
    running_min = np.minimum.accumulate(a)
    return float(np.max(a[1:] - running_min[:-1]))


# --------------------------------------------------------------------------
# contraction, equicontinuity, metric derivative


def distance_series(trajA: Trajectory, trajB: Trajectory) -> np.ndarray:
    if len(trajA) != len(trajB) or not np.allclose(trajA.times, trajB.times):
        raise ValueError("trajectories must share a time grid")
    return np.array([w2(a, b) for a, b in zip(trajA.measures(), trajB.measures())])


def contraction_check(trajA: Trajectory, trajB: Trajectory) -> float:
    """Largest one-step increase of ``W2(A(t), B(t))``."""
    d = distance_series(trajA, trajB)
    return float(np.max(np.diff(d))) if d.size > 1 else 0.0


def equicontinuity_constant(e0: float, params: ModelParams) -> float:
    """``sqrt(2) sqrt(E0 - log alpha + 1)``, implemented as stated."""
    return float(math.sqrt(2.0) * math.sqrt(e0 - math.log(params.alpha) + 1.0))


def equicontinuity_check(traj: Trajectory, params: ModelParams) -> CertificateReport:
    """``W2(mu(t2), mu(t1)) <= C sqrt(t2 - t1 + h)`` over every snapshot pair."""
    h = traj.config.h if isinstance(traj.config, SolverConfig) else traj.dt
    C = equicontinuity_constant(energy_value(traj.measure(0), params), params)
    D = pairwise_w2(traj.measures())
    t = np.asarray(traj.times, dtype=float)
    dt = np.abs(t[:, None] - t[None, :])
    bound = C * np.sqrt(dt + h)
    iu = np.triu_indices(len(t), k=1)
    ratio = D[iu] / bound[iu] if iu[0].size else np.zeros(1)
    violations = int(np.sum(D[iu] > bound[iu]))
    report = CertificateReport()
    report.add(
        "equicontinuity",
        float(np.max(ratio)) if ratio.size else 0.0,
        1.0,
        0.0,
        "max over pairs of W2(mu(t2),mu(t1)) / (C sqrt(t2-t1+h)) <= 1",
        C=C,
        violations=violations,
        pairs=int(iu[0].size),
    )
    return report


def metric_derivative(traj: Trajectory) -> np.ndarray:
    """Difference quotients ``W2(mu_i, mu_{i+1}) / (t_{i+1} - t_i)``."""
    m = traj.measures()
    dt = np.diff(np.asarray(traj.times, dtype=float))
    return np.array([w2(m[i], m[i + 1]) for i in range(len(m) - 1)]) / dt


def energy_identity_residual(traj: Trajectory, T: float, params: ModelParams) -> float:
    """``|1/2 int |mu'|^2 + 1/2 int |dE|^2 + E(mu(T)) - E(mu_0)|`` on ``[0, T]``.

    Both time integrals are Riemann sums over the steps: the difference
    quotient of step ``i`` and the slope at its end state ``mu_{i+1}``. The
    slope at ``t = 0`` is never used; it is infinite for rough initial data.
    """
    t = np.asarray(traj.times, dtype=float)
    k = int(np.searchsorted(t, T * (1 + 1e-12) + 1e-15, side="right")) - 1
    if k < 1:
        return 0.0
    md = metric_derivative(traj)[:k]
    kinetic = 0.5 * np.sum(md**2 * np.diff(t[: k + 1]))
    slopes = np.array([slope(m, params) for m in traj.measures()[1 : k + 1]])
    dissipation = 0.5 * np.sum(slopes**2 * np.diff(t[: k + 1]))
    e0 = energy_value(traj.measure(0), params)
    eT = energy_value(traj.measure(k), params)
    return float(abs(kinetic + dissipation + eT - e0))


# --------------------------------------------------------------------------
# convergence to the reference solution


def sup_error(traj: Trajectory, ref: Trajectory) -> float:
    """``max_k W2(traj(t_k), ref(t_k))`` over the snapshot times of ``traj``.

    ``ref`` must carry snapshots on a grid that refines the grid of ``traj``.
    """
    ref_t = np.asarray(ref.times, dtype=float)
    worst = 0.0
    for k, t in enumerate(traj.times):
        j = int(np.argmin(np.abs(ref_t - t)))
        if abs(ref_t[j] - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"reference has no snapshot at t={t:g}")
        worst = max(worst, w2(traj.measure(k), ref.states[j]))
    return float(worst)


def convergence_report(h_list: Sequence[float], errors: Sequence[float], min_order: float = 0.8) -> CertificateReport:
    """Monotone decrease of ``e(h)`` and observed orders ``log(e_k/e_{k+1}) / log(h_k/h_{k+1})``."""
    report = CertificateReport()
    orders = [float("nan")]
    for i in range(1, len(h_list)):
        orders.append(math.log(errors[i - 1] / errors[i]) / math.log(h_list[i - 1] / h_list[i]))
        h = h_list[i]
        report.add(f"convergence_error_h={h:g}", errors[i], errors[i - 1], 0.0, "e(h) <= e(previous h)", h=h)
        report.add(f"convergence_order_h={h:g}", min_order, orders[i], 0.0, f"observed order >= {min_order}", h=h)
    report.tables["convergence"] = {"h": list(map(float, h_list)), "error": list(map(float, errors)), "order": orders}
    return report


def reference_for(mu0: GMeasure, T: float, params: ModelParams, h_list: Sequence[float], pde: PdeConfig) -> Trajectory:
    """Reference run covering every grid ``k h`` up to ``ceil(T/h) h``."""
    snap = min(h_list)
    for h in h_list:
        if abs(h / snap - round(h / snap)) > 1e-9:
            raise ValueError("every h must be a multiple of the smallest one")
    t_end = max(math.ceil(T / h - 1e-9) * h for h in h_list)
    return pde_solve(mu0, t_end, params, pde, snapshot_dt=snap)


def convergence_study(
    mu0: GMeasure,
    T: float,
    params: ModelParams,
    h_list: Sequence[float],
    N: int = 256,
    pde: PdeConfig = PdeConfig(),
    min_order: float = 0.8,
    newton_tol: float = 1e-10,
) -> CertificateReport:
    """Sup-in-time W2 error of minimizing movements against the reference solver."""
    h_list = [float(h) for h in h_list]
    if any(b >= a for a, b in zip(h_list, h_list[1:])):
        raise ValueError("h_list must be decreasing")
    ref = reference_for(mu0, T, params, h_list, pde)
    errors = []
    for h in h_list:
        traj = run_trajectory(mu0, T, params, SolverConfig(h=h, N=N, newton_tol=newton_tol), track_el=False)
        errors.append(sup_error(traj, ref))
    return convergence_report(h_list, errors, min_order)


# --------------------------------------------------------------------------
# whole-trajectory certificate


def conservation_checks(traj: Trajectory, mass_tol: float = 1e-6, moment_tol: float = 1e-4) -> CertificateReport:
    measures = traj.measures()
    if traj.kind == "pde":
        # snapshots are renormalized; the solver records the raw drift
        masses = 1.0 + np.array([d.mass_error for d in traj.diagnostics])
    else:
        masses = np.array([mass(m) for m in traj.states])
    moments = np.array([first_moment(m) for m in measures])
    report = CertificateReport()
    report.add("mass", float(np.max(np.abs(masses - 1.0))), 0.0, mass_tol, "|interior mass - 1| <= tol")
    report.add("first_moment", float(np.max(np.abs(moments - moments[0]))), 0.0, moment_tol, "|moment(t) - moment(0)| <= tol")
    return report


def energy_checks(traj: Trajectory, params: ModelParams, startup: int = 5, monotone_tol: float | None = None) -> CertificateReport:
    E = _energies(traj)
    floor = energy_lower_bound(params)
    report = CertificateReport()
    report.add("energy_floor", floor - float(np.min(E)), 0.0, 1e-8, "E(mu(t)) >= log(alpha) + 1")
    if traj.kind == "jko":
        tol = traj.config.newton_tol if monotone_tol is None else monotone_tol
        inc = np.diff(E)
    else:
        tol = 1e-12 if monotone_tol is None else monotone_tol
        inc = np.diff(E[startup:]) if E.size > startup + 1 else np.zeros(1)
    report.add("energy_monotone", float(np.max(inc)) if inc.size else 0.0, 0.0, tol, "E(t_{k+1}) - E(t_k) <= tol")
    return report


def certify_trajectory(
    traj: Trajectory,
    params: ModelParams,
    sigmas: Optional[Iterable[Measure]] = None,
    test_functions: Optional[Sequence[TestFunction]] = None,
    evi_tol: float = 1e-3,
    el_tol: float = 1e-6,
    weak_tol: float = 1e-3,
) -> CertificateReport:
    """Every check applicable to a single trajectory."""
    report = CertificateReport()
    report.extend(conservation_checks(traj))
    report.extend(energy_checks(traj, params))
    tfs = list(test_functions) if test_functions is not None else corpus(_horizon_D(traj))
    if traj.kind == "jko":
        total, bound = dissipation_sum(traj)
        report.add("dissipation_sum", total, bound, 1e-8, "sum W2^2 steps <= 2h(E0 - log alpha - 1)")
        worst = -np.inf
        m = traj.measures()
        for i in range(len(m) - 1):
            for tf in tfs:
                lhs, bnd = el_residual(m[i], m[i + 1], traj.config.h, tf, params)
                worst = max(worst, lhs - bnd)
        report.add("euler_lagrange", worst, 0.0, el_tol, "EL residual - bound <= tol, all steps and test functions")
        report.extend(equicontinuity_check(traj, params))
    if sigmas is None:
        sigmas = [make_equilibrium(params, _common_n(traj), center=0.5 * (traj.states[0].L + traj.states[0].R))]
    for k, sigma in enumerate(sigmas):
        report.add(f"evi_sigma{k}", evi_max_gap(traj, sigma, params), 0.0, evi_tol, "max EVI gap over snapshot pairs <= tol")
    weak = max(weak_form_residual(traj, tf, params) for tf in tfs)
    if traj.kind == "jko":
        # accumulated Euler-Lagrange bounds: sum_i h sup|zeta''| W2^2_i / (2h)
        sup2 = max(tf.sup_d2() for tf in tfs)
        e0 = energy_value(traj.measure(0), params)
        weak_rhs = traj.config.h * sup2 * (e0 - energy_lower_bound(params))
        report.add("weak_form", weak, weak_rhs, weak_tol, "max weak-form residual <= h sup|zeta''| (E0 - log alpha - 1) + tol")
    else:
        report.add("weak_form", weak, 0.0, weak_tol, "max weak-form residual over test functions <= tol")
    eid = energy_identity_residual(traj, float(traj.times[-1]), params)
    report.tables["energy_identity_residual"] = eid
    return report
