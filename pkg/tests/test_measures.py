import numpy as np
import pytest
from hypothesis import given, strategies as st

from wgf.errors import InvalidMeasureError
from wgf.measures import (
    GMeasure,
    ModelParams,
    QuantileRep,
    boundary_traces,
    first_moment,
    from_quantile,
    integrate_against,
    is_regular,
    make_equilibrium,
    make_uniform,
    mass,
    regularize,
    resample,
    to_quantile,
)
from wgf.profiles import random_smooth


def test_model_params_rejects_nonpositive():
    with pytest.raises(ValueError, match="alpha"):
        ModelParams(0.0, 1.0)
    with pytest.raises(ValueError, match="beta"):
        ModelParams(1.0, -2.0)


def test_make_uniform_examples():
    np.testing.assert_allclose(make_uniform(0, 1, ModelParams(1, 1), 4).rho, [1, 1, 1, 1])
    np.testing.assert_allclose(make_uniform(-1, 1, ModelParams(0.5, 1), 2).rho, [0.5, 0.5])
    with pytest.raises(InvalidMeasureError):
        make_uniform(1, 0, ModelParams(1, 1), 4)


def test_gmeasure_rejects_wrong_mass_and_negative_density():
    with pytest.raises(InvalidMeasureError):
        GMeasure(0.0, 1.0, np.array([1.0, 1.1]), 1.0)
    with pytest.raises(InvalidMeasureError):
        GMeasure(0.0, 1.0, np.array([2.5, -0.5]), 1.0)


def test_states_are_immutable():
    mu = make_uniform(0, 1, ModelParams(1, 1), 4)
    with pytest.raises(ValueError):
        mu.rho[0] = 3.0


@pytest.mark.parametrize("beta", [0.25, 1.0, 3.0])
def test_integrate_constant_is_total_mass(beta):
    mu = random_smooth(np.random.default_rng(1), ModelParams(1, beta), 64)
    assert integrate_against(mu, lambda x: np.ones_like(x)) == pytest.approx(1 + 2 * beta, abs=1e-10)
    assert integrate_against(mu, np.zeros_like) == 0.0


def test_integrate_linear_uniform():
    mu = make_uniform(0, 1, ModelParams(1, 0.5), 16)
    assert integrate_against(mu, lambda x: x) == pytest.approx(1.0, abs=1e-14)


def test_mass_and_first_moment_examples():
    mu = make_uniform(0, 1, ModelParams(1, 1), 8)
    assert mass(mu) == pytest.approx(1.0, abs=1e-14)
    assert first_moment(mu) == pytest.approx(1.5, abs=1e-14)
    assert first_moment(make_uniform(-1, 1, ModelParams(1, 2.7), 8)) == pytest.approx(0.0, abs=1e-14)


def test_to_quantile_examples():
    np.testing.assert_allclose(to_quantile(make_uniform(0, 1, ModelParams(1, 1), 2)).X, [0, 0.5, 1])
    np.testing.assert_allclose(to_quantile(make_uniform(0, 0.5, ModelParams(1, 1), 2)).X, [0, 0.25, 0.5])
    with pytest.raises(InvalidMeasureError):
        to_quantile(GMeasure.from_density(0, 1, [2.0, 0.0], 1.0))


def test_quantile_rep_invariants():
    with pytest.raises(InvalidMeasureError):
        QuantileRep(0.0, 1.0, np.array([0.0, 0.6, 0.5, 1.0]), 1.0)
    with pytest.raises(InvalidMeasureError):
        QuantileRep(0.2, 1.0, np.array([0.0, 0.5, 1.0]), 1.0)


def test_quantile_moment_matches_density_moment():
    # quantile cells straddling density cells cost O(1/N^2)
    diffs = []
    for N in (128, 256, 512):
        mu = random_smooth(np.random.default_rng(4), ModelParams(1, 1), N)
        diffs.append(abs(first_moment(to_quantile(mu)) - first_moment(mu)))
    assert diffs[0] < 1e-5
    assert diffs[2] <= 0.3 * diffs[0]


@given(seed=st.integers(0, 10_000))
def test_round_trip_is_first_order(seed):
    errs = []
    for N in (64, 128, 256):
        mu = random_smooth(np.random.default_rng(seed), ModelParams(1, 1), N)
        back = from_quantile(to_quantile(mu), N)
        err = np.sum(np.abs(back.rho - mu.rho)) * mu.dx
        assert err <= 0.5 / N
        errs.append(err)
    # halves per doubling; 0.6 leaves slack for the pre-asymptotic range
    assert errs[1] <= 0.6 * errs[0]
    assert errs[2] <= 0.6 * errs[1]


@given(seed=st.integers(0, 10_000))
def test_quantiles_strictly_increasing_for_positive_density(seed):
    mu = random_smooth(np.random.default_rng(seed), ModelParams(1, 1), 128)
    assert np.all(np.diff(to_quantile(mu).X) > 0)


def test_boundary_traces_exact_for_linear_density():
    x = np.linspace(0, 1, 65)
    rho = 0.5 + 0.5 * (x[:-1] + x[1:])  # cell averages of 1/2 + x
    rho = rho / (rho.sum() / 64)
    mu = GMeasure.from_density(0, 1, rho, 1.0)
    a, b = boundary_traces(mu)
    assert a == pytest.approx(rho[0] - 0.5 * (rho[1] - rho[0]), rel=1e-12)
    assert b == pytest.approx(rho[-1] + 0.5 * (rho[-1] - rho[-2]), rel=1e-12)
    assert b / a == pytest.approx(3.0, rel=1e-12)


def test_resample_conserves_mass_and_support():
    mu = random_smooth(np.random.default_rng(9), ModelParams(1, 1), 100)
    r = resample(mu, 37)
    assert (r.L, r.R, r.N) == (mu.L, mu.R, 37)
    assert mass(r) == pytest.approx(1.0, abs=1e-12)


def test_regularize_clamps_and_renormalizes():
    mu = GMeasure.from_density(0, 1, [2.0, 0.0], 1.0)
    assert not is_regular(mu)
    reg = regularize(mu, n=10.0)
    assert mass(reg) == pytest.approx(1.0, abs=1e-12)
    assert is_regular(reg)
    np.testing.assert_allclose(reg.rho, np.array([2.0, 0.1]) / 1.05)
    assert is_regular(make_equilibrium(ModelParams(2, 1), 16))
