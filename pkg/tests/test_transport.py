import numpy as np
import pytest
from hypothesis import given, strategies as st

from wgf.errors import InvalidMeasureError, NotRegularError
from wgf.measures import GMeasure, ModelParams, gauss_points, make_uniform, to_quantile
from wgf.profiles import random_smooth
from wgf.transport import (
    apply_map,
    check_monotone_support,
    kantorovich_potential,
    legendre_transform,
    optimal_map,
    pushforward,
    w2,
    w2_density,
    w2_squared,
)

P = ModelParams(1.0, 1.0)


def shifted(mu: GMeasure, d: float) -> GMeasure:
    return GMeasure(mu.L + d, mu.R + d, mu.rho, mu.beta)


def smooth(seed, N=128, beta=1.0):
    return random_smooth(np.random.default_rng(seed), ModelParams(1.0, beta), N)


def test_w2_density_examples():
    u01 = make_uniform(0, 1, P, 64)
    assert w2_density(u01, u01, 64) == 0.0
    assert w2_density(u01, make_uniform(1, 2, P, 64), 64) == pytest.approx(1.0, abs=1e-14)
    # int_0^1 m^2 dm under the midpoint rule is 1/3 - 1/(12 N^2)
    N = 64
    assert w2_density(u01, make_uniform(0, 2, P, N), N) == pytest.approx(1 / 3 - 1 / (12 * N**2), abs=1e-14)
    assert w2_density(u01, make_uniform(0, 2, P, 4096), 4096) == pytest.approx(1 / 3, abs=1e-7)


def test_w2_decomposition_examples():
    mu = smooth(0)
    assert w2_squared(mu, shifted(mu, 0.3)) == pytest.approx(3 * 0.09, rel=1e-12)
    b = ModelParams(1, 0.5)
    assert w2_squared(make_uniform(0, 1, b, 64), make_uniform(1, 2, b, 64)) == pytest.approx(2.0, abs=1e-13)
    assert w2(mu, mu) == 0.0


def test_w2_rejects_mismatched_beta():
    with pytest.raises(InvalidMeasureError):
        w2(smooth(0, beta=1.0), smooth(0, beta=2.0))


@given(a=st.integers(0, 5000), b=st.integers(0, 5000))
def test_w2_symmetric(a, b):
    mu, nu = smooth(a), smooth(b)
    assert abs(w2(mu, nu) - w2(nu, mu)) <= 1e-9


@given(a=st.integers(0, 5000), b=st.integers(0, 5000), c=st.integers(0, 5000))
def test_w2_triangle(a, b, c):
    x, y, z = smooth(a), smooth(b), smooth(c)
    assert w2(x, z) <= w2(x, y) + w2(y, z) + 1e-9


def test_optimal_map_examples():
    mu = smooth(3)
    ident = optimal_map(mu, mu)
    np.testing.assert_allclose(ident.map_nodes[:, 1], ident.map_nodes[:, 0], atol=1e-14)
    tr = optimal_map(mu, shifted(mu, 0.25))
    np.testing.assert_allclose(tr.map_nodes[:, 1], tr.map_nodes[:, 0] + 0.25, atol=1e-12)
    dil = optimal_map(make_uniform(0, 1, P, 32), make_uniform(0, 2, P, 32))
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(apply_map(dil, x), 2 * x, atol=1e-14)


def test_optimal_map_requires_regular_target():
    bad = GMeasure.from_density(0, 1, [2.0, 0.0], 1.0)
    with pytest.raises(NotRegularError):
        optimal_map(smooth(0), bad)


@given(a=st.integers(0, 5000), b=st.integers(0, 5000))
def test_optimal_map_monotone_and_pushes_forward(a, b):
    mu, nu = smooth(a), smooth(b)
    res = optimal_map(mu, nu)
    assert check_monotone_support(res.map_nodes)
    image = pushforward(mu, res)
    assert w2(image, nu) <= 2.0 / mu.N


def test_pushforward_error_is_first_order_or_better():
    errs = []
    for N in (32, 64, 128):
        mu, nu = smooth(11, N), smooth(12, N)
        errs.append(w2(pushforward(mu, optimal_map(mu, nu)), nu))
    assert errs[2] <= errs[0] / 2 + 1e-14


def test_check_monotone_support_detects_swaps():
    x = np.linspace(0, 1, 10)
    nodes = np.column_stack([x, x])
    assert check_monotone_support(nodes)
    nodes[[3, 4], 1] = nodes[[4, 3], 1]
    assert not check_monotone_support(nodes)


def test_potential_examples():
    mu = smooth(5)
    same = kantorovich_potential(mu, mu)
    x, phi = same.phi_nodes.T
    q = to_quantile(mu)
    inside = (x >= q.X[0]) & (x <= q.X[-1])
    # phi = x^2/2 up to a constant on the support
    resid = phi[inside] - 0.5 * x[inside] ** 2
    assert np.ptp(resid) < 1e-12
    assert abs(same.dual_value) < 1e-12

    d = 0.2
    tr = kantorovich_potential(mu, shifted(mu, d))
    x, phi = tr.phi_nodes.T
    inside = (x >= q.X[0]) & (x <= q.X[-1])
    resid = phi[inside] - (0.5 * x[inside] ** 2 + d * x[inside])
    assert np.ptp(resid) < 1e-12


def test_duality_dilation_example():
    res = kantorovich_potential(make_uniform(0, 1, P, 512), make_uniform(0, 2, P, 512))
    assert res.dual_value == pytest.approx(2 / 3, abs=1e-5)
    assert 0.5 * res.w2_squared == pytest.approx(2 / 3, abs=1e-6)


def test_potential_is_convex():
    res = kantorovich_potential(smooth(1), smooth(2))
    x, phi = res.phi_nodes.T
    slopes = np.diff(phi) / np.diff(x)
    assert np.all(np.diff(slopes) >= -1e-10)


def test_duality_error_halves():
    errs = []
    for N in (64, 128, 256):
        mu, nu = smooth(21, N), smooth(22, N)
        res = kantorovich_potential(mu, nu)
        errs.append(abs(0.5 * res.w2_squared - res.dual_value))
    assert errs[0] <= 5 / 64
    assert errs[1] <= errs[0] / 2 and errs[2] <= errs[1] / 2


def test_legendre_transform_of_quadratic():
    x = np.linspace(-3, 3, 6001)
    y = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(legendre_transform(x, 0.5 * x**2, y), 0.5 * y**2, atol=1e-6)


@given(eps=st.floats(0.05, 0.5), seed=st.integers(0, 1000))
def test_perturbed_potential_is_suboptimal(eps, seed):
    mu, nu = smooth(seed), smooth(seed + 1)
    res = kantorovich_potential(mu, nu)
    x, phi = res.phi_nodes.T
    # still convex: add a convex bump
    phi_t = phi + eps * (x - x.mean()) ** 2 + eps * np.abs(x - x.mean())
    q0, q1 = to_quantile(mu), to_quantile(nu)
    p0, w0 = gauss_points(q0)
    p1, w1 = gauss_points(q1)
    ys = np.linspace(min(p1.min(), q1.L) - 1, max(p1.max(), q1.R) + 1, 8)
    xg = np.concatenate([[x[0] - 10.0], x, [x[-1] + 10.0]])
    # affine continuation keeps the conjugate finite on the target support
    sl, sr = (phi_t[1] - phi_t[0]) / (x[1] - x[0]), (phi_t[-1] - phi_t[-2]) / (x[-1] - x[-2])
    pg = np.concatenate([[phi_t[0] - 10.0 * sl], phi_t, [phi_t[-1] + 10.0 * sr]])
    del ys

    def pt(z):
        return np.interp(z, xg, pg)

    def pts(z):
        return legendre_transform(xg, pg, z)

    beta = q0.beta
    e0, e1 = np.array([q0.L, q0.R]), np.array([q1.L, q1.R])
    dual = (
        np.dot(w0, 0.5 * p0**2 - pt(p0))
        + beta * np.sum(0.5 * e0**2 - pt(e0))
        + np.dot(w1, 0.5 * p1**2 - pts(p1))
        + beta * np.sum(0.5 * e1**2 - pts(e1))
    )
    assert dual <= 0.5 * res.w2_squared + 1e-6


def test_conjugate_matches_sampled_legendre_transform():
    res = kantorovich_potential(smooth(31, 64), smooth(32, 64))
    x, phi = res.phi_nodes.T
    y, phis = res.phi_star_nodes.T
    sampled = legendre_transform(x, phi, y)
    # sampling underestimates the conjugate by O(width^2)
    assert np.all(sampled <= phis + 1e-12)
    assert np.max(phis - sampled) < 1e-4
