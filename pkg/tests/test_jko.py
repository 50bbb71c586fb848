import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wgf import jko
from wgf.energy import energy_value
from wgf.errors import ConvergenceError, DomainCollapseError, InvalidMeasureError
from wgf.jko import SolverConfig, dissipation_sum, el_residual, jko_objective, jko_step, jko_step_quantile, run_trajectory
from wgf.measures import GMeasure, ModelParams, first_moment, make_equilibrium, make_uniform, mass, to_quantile
from wgf.profiles import random_smooth
from wgf.reference_pde import PdeConfig, pde_solve
from wgf.testfunctions import TestFunction, corpus
from wgf.transport import w2

P = ModelParams(1.0, 1.0)


def test_solver_config_validation():
    with pytest.raises(ValueError, match="h"):
        SolverConfig(h=0.0)
    with pytest.raises(ValueError, match="N"):
        SolverConfig(N=3)
    with pytest.raises(ValueError):
        SolverConfig(linesearch_shrink=1.0)


def test_objective_examples():
    eq = to_quantile(make_equilibrium(P, 64))
    assert jko_objective(eq, eq, 0.1, P) == pytest.approx(1.0, abs=1e-14)

    sigma = to_quantile(random_smooth(np.random.default_rng(0), P, 64))
    d, h = 0.1, 0.01
    moved = type(sigma)(sigma.L + d, sigma.R + d, sigma.X + d, sigma.beta)
    expected = energy_value(sigma, P) + 3 * d**2 / (2 * h)
    assert jko_objective(moved, sigma, h, P) == pytest.approx(expected, rel=1e-12)

    N = 512
    q = to_quantile(make_uniform(0, 2, P, N))
    s = to_quantile(make_uniform(0, 1, P, N))
    # midpoint interior term is 1/3 - 1/(12 N^2)
    exact = 0.5 * (1 / 3 - 1 / (12 * N**2) + 1) + (2 - math.log(2))
    assert jko_objective(q, s, 1.0, P) == pytest.approx(exact, abs=1e-13)
    assert jko_objective(q, s, 1.0, P) == pytest.approx(1.97352, abs=1e-5)


def test_equilibrium_is_fixed_point():
    cfg = SolverConfig()
    eq = make_equilibrium(P, cfg.N)
    mu, diag = jko_step(eq, P, cfg)
    assert w2(mu, eq) <= 10 * cfg.newton_tol
    assert diag.w2_sq_step <= 1e-18


def test_uniform_at_threshold_barely_moves():
    cfg = SolverConfig(h=0.01, N=256)
    mu0 = make_uniform(0, 1, P, cfg.N)
    mu, _ = jko_step(mu0, P, cfg)
    # traces equal alpha: the ends move by O(h^2)
    assert abs(mu.L) < 1e-3 and abs(mu.R - 1) < 1e-3
    ref = pde_solve(mu0, 0.01, P, PdeConfig(M=200, dt=1e-4), snapshot_dt=0.01)
    assert abs(mu.L - ref.states[-1].L) < 1e-3
    assert abs(mu.R - ref.states[-1].R) < 1e-3


@given(seed=st.integers(0, 10_000), h=st.sampled_from([1e-3, 1e-2]))
def test_step_decreases_energy_and_beats_previous_point(seed, h):
    cfg = SolverConfig(h=h, N=128)
    sigma = random_smooth(np.random.default_rng(seed), P, 128)
    q = to_quantile(sigma)
    mu, d = jko_step_quantile(q, P, cfg)
    assert d.energy_after <= d.energy_before
    assert d.energy_after + d.w2_sq_step / (2 * h) <= d.energy_before + cfg.newton_tol
    assert d.grad_norm <= cfg.newton_tol


@given(seed=st.integers(0, 10_000))
def test_newton_objective_never_increases(seed):
    cfg = SolverConfig(h=5e-3, N=128)
    q = to_quantile(random_smooth(np.random.default_rng(seed), P, 128))
    _, d = jko_step_quantile(q, P, cfg)
    hist = np.array(d.objective_history)
    assert np.all(np.diff(hist) <= 1e-12 * np.abs(hist[:-1]))


def test_minimizer_unique_from_random_starts():
    cfg = SolverConfig(h=5e-3, N=128)
    rng = np.random.default_rng(5)
    q = to_quantile(random_smooth(rng, P, 128))
    ref, _ = jko_step_quantile(q, P, cfg)
    for _ in range(5):
        gaps = rng.uniform(0.2, 2.0, size=q.N)
        start = q.L - 0.05 + np.concatenate([[0.0], np.cumsum(gaps)]) * (q.R - q.L + 0.1) / gaps.sum()
        mu, _ = jko_step_quantile(q, P, cfg, initial=start)
        assert w2(mu, ref) <= 10 * cfg.newton_tol


def test_active_constraints_bind_when_traces_exceed_alpha():
    cfg = SolverConfig(h=1e-3, N=128)
    _, d = jko_step(make_uniform(0, 0.5, P, 128), P, cfg)
    assert d.active_constraints == (True, True)


def test_nonconvergence_reports_last_iterate():
    cfg = SolverConfig(h=0.5, N=64, max_iters=1)
    with pytest.raises(ConvergenceError) as info:
        jko_step(make_uniform(0, 0.1, P, 64), P, cfg)
    assert info.value.last_iterate.shape == (65,)
    assert info.value.grad_norm > cfg.newton_tol


def test_domain_collapse_guard():
    with pytest.raises(DomainCollapseError):
        jko._check_extent(1.0, 1.0 + 1e-17)


def test_el_residual_linear_test_function():
    cfg = SolverConfig(h=1e-3, N=256)
    sigma = random_smooth(np.random.default_rng(2), P, 256)
    q = to_quantile(sigma)
    mu, _ = jko_step_quantile(q, P, cfg)
    lin = TestFunction("polynomial", 0.0, 1.0, (0.0, 2.5))
    lhs, bound = el_residual(q, mu, cfg.h, lin, P)
    assert bound == 0.0
    # reduces to the first-moment change over h
    assert lhs == pytest.approx(2.5 * abs(first_moment(mu) - first_moment(q)) / cfg.h, abs=1e-12)
    assert lhs < 1e-6


def test_el_residual_bound_zero_when_no_motion():
    mu = make_uniform(0, 0.5, P, 64)
    tf = TestFunction("gaussian_bump", 0.0, 0.5)
    lhs, bound = el_residual(mu, mu, 1e-3, tf, P)
    assert bound == 0.0
    assert lhs >= 0.0


def test_el_residual_within_bound_on_gaussian_bumps():
    cfg = SolverConfig(h=1e-3, N=256)
    q = to_quantile(make_uniform(0, 0.5, P, 256))
    mu, _ = jko_step_quantile(q, P, cfg)
    for c in np.linspace(-0.4, 0.9, 7):
        lhs, bound = el_residual(q, mu, cfg.h, TestFunction("gaussian_bump", float(c), 0.5), P)
        assert lhs <= bound + 1e-6


def test_run_from_equilibrium_stays(unit_params):
    cfg = SolverConfig(h=1e-2, N=128)
    eq = make_equilibrium(unit_params, 128)
    traj = run_trajectory(eq, 0.2, unit_params, cfg, track_el=False)
    assert len(traj) == 21
    assert max(w2(m, eq) for m in traj.measures()) <= 10 * cfg.newton_tol


def test_run_uses_ceil_steps():
    traj = run_trajectory(make_equilibrium(P, 16), 0.0105, P, SolverConfig(h=1e-3, N=16), track_el=False)
    assert len(traj) == 12
    np.testing.assert_allclose(np.diff(traj.times), 1e-3, rtol=1e-12)


def test_step_run_frozen_values(step_jko, step_pde):
    """rho = 2 on [0, 1/2] up to T = 1/4; the reference solver is the oracle."""
    end = step_jko.states[-1]
    assert end.L == pytest.approx(-0.12259, abs=2e-5)
    assert end.R == pytest.approx(0.62259, abs=2e-5)
    assert end.L == pytest.approx(step_pde.states[-1].L, abs=5e-4)
    assert end.L + end.R == pytest.approx(0.5, abs=1e-12)
    assert all(d.newton_iters <= 5 for d in step_jko.diagnostics)
    assert all(d.active_constraints == (True, True) for d in step_jko.diagnostics)


def test_run_properties(step_jko, unit_params):
    E = np.array([energy_value(m, unit_params) for m in step_jko.measures()])
    assert np.all(np.diff(E) <= step_jko.config.newton_tol)
    mom = np.array([first_moment(m) for m in step_jko.measures()])
    assert np.max(np.abs(mom - mom[0])) <= 1e-4
    assert max(abs(mass(s) - 1) for s in step_jko.states) <= 1e-10
    assert max(d.el_residual_max for d in step_jko.diagnostics) <= 1e-6


def test_dissipation_examples(unit_params):
    traj = run_trajectory(make_uniform(0, 0.5, unit_params, 256), 0.1, unit_params, SolverConfig(h=0.01), track_el=False)
    total, bound = dissipation_sum(traj)
    assert bound == pytest.approx(2 * 0.01 * (math.log(2) - 0.5), abs=1e-14)
    assert bound == pytest.approx(0.003863, abs=1e-6)
    assert total <= bound + 1e-8

    one = run_trajectory(make_uniform(0, 0.5, unit_params, 64), 1e-3, unit_params, SolverConfig(N=64), track_el=False)
    assert dissipation_sum(one)[0] == one.diagnostics[0].w2_sq_step

    eq = run_trajectory(make_equilibrium(unit_params, 64), 0.01, unit_params, SolverConfig(N=64), track_el=False)
    assert dissipation_sum(eq)[0] <= 1e-18


def test_run_rejects_nonpositive_horizon():
    with pytest.raises(ValueError):
        run_trajectory(make_equilibrium(P, 16), 0.0, P, SolverConfig(N=16))


def test_corpus_tracks_el_by_default(step_jko):
    assert all(np.isfinite(d.el_residual_max) for d in step_jko.diagnostics)
    assert len(corpus(1.0)) == 12


def test_positive_density_required():
    with pytest.raises(InvalidMeasureError):
        jko_step(GMeasure.from_density(0, 1, [2.0, 0.0], 1.0), P, SolverConfig(N=8))
