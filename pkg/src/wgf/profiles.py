"""Named and randomized initial densities."""

from __future__ import annotations

import numpy as np

from .measures import GMeasure, ModelParams, make_equilibrium, make_uniform


def uniform(params: ModelParams, N: int, L: float = 0.0, R: float = 1.0) -> GMeasure:
    return make_uniform(L, R, params, N)


def equilibrium(params: ModelParams, N: int, center: float = 0.0) -> GMeasure:
    return make_equilibrium(params, N, center)


def step(params: ModelParams, N: int, L: float = 0.0, R: float = 1.0, ratio: float = 3.0, split: float = 0.5) -> GMeasure:
    """Two-level density: ``ratio`` times higher left of ``L + split (R - L)``."""
    x = np.linspace(L, R, N + 1)
    mid = L + split * (R - L)
    # exact cell averages of the indicator
    left_frac = np.clip((mid - x[:-1]) / (x[1:] - x[:-1]), 0.0, 1.0)
    rho = 1.0 + (ratio - 1.0) * left_frac
    return GMeasure.from_density(L, R, rho, params.beta)


def gaussian(
    params: ModelParams, N: int, L: float = 0.0, R: float = 1.0, center: float | None = None, width: float = 0.2, floor: float = 0.1
) -> GMeasure:
    """Gaussian bump plus a constant ``floor`` relative to its peak."""
    c = 0.5 * (L + R) if center is None else center
    return GMeasure.from_function(lambda x: floor + np.exp(-0.5 * ((x - c) / width) ** 2), L, R, N, params.beta)


def random_smooth(rng: np.random.Generator, params: ModelParams, N: int) -> GMeasure:
    """Positive trigonometric profile on a random interval.

    The density is ``1 + sum_k a_k cos(k pi xi + p_k)`` in the scaled variable
    ``xi in [0, 1]`` with ``sum |a_k| <= 0.6``, so its ratio of maximum to
    minimum is at most 4.
    """
    L = rng.uniform(-0.5, 0.0)
    length = rng.uniform(0.5, 1.5)
    a = rng.uniform(-1.0, 1.0, size=3)
    a *= 0.6 * rng.uniform(0.2, 1.0) / np.sum(np.abs(a))
    phase = rng.uniform(0.0, 2 * np.pi, size=3)
    k = np.arange(1, 4)

    def f(x):
        xi = (x - L) / length
        return 1.0 + np.sum(a * np.cos(np.pi * k * xi[..., None] + phase), axis=-1)

    return GMeasure.from_function(f, L, L + length, N, params.beta)


def random_corpus(n: int, params: ModelParams, N: int, seed: int = 0) -> list[GMeasure]:
    rng = np.random.default_rng(seed)
    return [random_smooth(rng, params, N) for _ in range(n)]


PROFILES = {
    "uniform": uniform,
    "equilibrium": equilibrium,
    "step": step,
    "gaussian": gaussian,
}
