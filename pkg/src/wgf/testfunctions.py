"""Smooth test functions for weak-form and Euler-Lagrange residuals.

A :class:`TestFunction` is a space profile ``zeta`` with its first three
derivatives, optionally multiplied by a time cutoff ``psi`` to form the
space-time function ``xi(t, x) = psi(t) zeta(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("gaussian_bump", "bspline_cubic", "poly_cutoff", "polynomial")

#: gaussian standard deviations per unit of support radius
_GAUSS_SIGMAS = 8.0


def _smooth_step(u):
    """C-infinity step: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)

    def f(v):
        out = np.zeros_like(v)
        pos = v > 0
        out[pos] = np.exp(-1.0 / v[pos])
        return out

    a, b = f(u), f(1.0 - u)
    return a / (a + b)


def _smooth_step_d(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = (u > 0) & (u < 1)
    v = u[inside]
    a = np.exp(-1.0 / v)
    b = np.exp(-1.0 / (1.0 - v))
    da = a / v**2
    db = -b / (1.0 - v) ** 2
    out[inside] = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return out


@dataclass(frozen=True)
class TimeCutoff:
    """``psi = 1`` on ``[0, t_flat]``, ``0`` after ``t_end``, smooth in between."""

    t_flat: float
    t_end: float

    def __call__(self, t):
        return 1.0 - _smooth_step((np.asarray(t, dtype=float) - self.t_flat) / (self.t_end - self.t_flat))

    def derivative(self, t):
        w = self.t_end - self.t_flat
        return -_smooth_step_d((np.asarray(t, dtype=float) - self.t_flat) / w) / w

    @classmethod
    def for_horizon(cls, T: float) -> "TimeCutoff":
        return cls(0.25 * T, 0.9 * T)


@dataclass(frozen=True)
class TestFunction:
    """Profile of a given ``kind`` centred at ``center`` with support radius ``width``.

    ``coeffs`` holds polynomial coefficients (lowest degree first) in the
    scaled variable ``r = (x - center) / width``; it is used by
    ``poly_cutoff`` and ``polynomial``.
    """

    kind: str
    center: float = 0.0
    width: float = 1.0
    coeffs: tuple = (1.0,)
    psi: TimeCutoff | None = field(default=None, compare=False)

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.width <= 0:
            raise ValueError("width must be positive")

    @property
    def support(self) -> tuple[float, float]:
        if self.kind == "polynomial":
            return (-np.inf, np.inf)
        return (self.center - self.width, self.center + self.width)

    def derivatives(self, x, order: int = 0) -> np.ndarray:
        """The ``order``-th derivative of ``zeta`` (``order`` in 0..3)."""
        x = np.asarray(x, dtype=float)
        r = (x - self.center) / self.width
        scale = self.width ** (-order)
        return scale * _PROFILES[self.kind](self, r, order)

    def zeta(self, x):
        return self.derivatives(x, 0)

    def dzeta(self, x):
        return self.derivatives(x, 1)

    def d2zeta(self, x):
        return self.derivatives(x, 2)

    def d3zeta(self, x):
        return self.derivatives(x, 3)

    def sup_d2(self, lo: float | None = None, hi: float | None = None, samples: int = 4001) -> float:
        """``max |zeta''|`` over ``[lo, hi]`` (default: the support)."""
        if self.kind == "polynomial":
            if lo is None or hi is None:
                raise ValueError("polynomial test functions need an explicit interval")
        else:
            lo, hi = self.support
        x = np.linspace(lo, hi, samples)
        return float(np.max(np.abs(self.d2zeta(x))))

    def with_time(self, psi: TimeCutoff) -> "TestFunction":
        return TestFunction(self.kind, self.center, self.width, self.coeffs, psi)

    # space-time evaluators; psi defaults to 1
    def _psi(self, t):
        return np.ones_like(np.asarray(t, dtype=float)) if self.psi is None else self.psi(t)

    def _dpsi(self, t):
        return np.zeros_like(np.asarray(t, dtype=float)) if self.psi is None else self.psi.derivative(t)

    def xi(self, t, x):
        return self._psi(t) * self.zeta(x)

    def xi_t(self, t, x):
        return self._dpsi(t) * self.zeta(x)

    def xi_x(self, t, x):
        return self._psi(t) * self.dzeta(x)

    def xi_xx(self, t, x):
        return self._psi(t) * self.d2zeta(x)


def _gaussian(tf: TestFunction, r, order):
    s = 1.0 / _GAUSS_SIGMAS
    z = r / s
    g = np.exp(-0.5 * z**2)
    # derivatives of exp(-z^2/2) in r, via Hermite polynomials in z
    herm = (1.0, -z, z**2 - 1.0, -(z**3) + 3.0 * z)[order]
    # truncated at 8 sigma: the jumps there are below 1e-10 through order 2
    return np.where(np.abs(r) < 1.0, herm * g * s ** (-order), 0.0)


def _bspline_piece(u, order):
    """Cardinal cubic B-spline on [-2, 2] and its derivatives."""
    a = np.abs(u)
    sgn = np.sign(u)
    out = np.zeros_like(u)
    inner = a < 1
    outer = (a >= 1) & (a < 2)
    ai, ao = a[inner], a[outer]
    if order == 0:
        out[inner] = 2.0 / 3.0 - ai**2 + 0.5 * ai**3
        out[outer] = (2.0 - ao) ** 3 / 6.0
    elif order == 1:
        out[inner] = sgn[inner] * (-2.0 * ai + 1.5 * ai**2)
        out[outer] = sgn[outer] * (-0.5 * (2.0 - ao) ** 2)
    elif order == 2:
        out[inner] = -2.0 + 3.0 * ai
        out[outer] = 2.0 - ao
    else:
        out[inner] = 3.0 * sgn[inner]
        out[outer] = -sgn[outer]
    return out


def _bspline(tf: TestFunction, r, order):
    # support radius maps to two knot spacings
    return _bspline_piece(2.0 * r, order) * 2.0**order


def _poly_eval(coeffs, r, order):
    c = np.polynomial.polynomial.polyder(np.asarray(coeffs, dtype=float), order) if order else np.asarray(coeffs, dtype=float)
    return np.polynomial.polynomial.polyval(r, c)


def _poly_cutoff(tf: TestFunction, r, order):
    """``p(r) (1 - r^2)^4`` on ``|r| < 1``."""
    base = np.polynomial.polynomial.polymul(tf.coeffs, np.polynomial.polynomial.polypow([1.0, 0.0, -1.0], 4))
    out = _poly_eval(base, r, order)
    return np.where(np.abs(r) < 1.0, out, 0.0)


def _polynomial(tf: TestFunction, r, order):
    return _poly_eval(tf.coeffs, r, order)


_PROFILES = {
    "gaussian_bump": _gaussian,
    "bspline_cubic": _bspline,
    "poly_cutoff": _poly_cutoff,
    "polynomial": _polynomial,
}


def corpus(D: float) -> list[TestFunction]:
    """Twelve test functions spread over ``[-D - 1, D + 1]``.

    Four of each compactly supported kind, with interleaved centres. Each
    support radius is the distance from the centre to the edge of the
    window, capped at 1 and floored at 1/2.
    """
    D = float(abs(D))
    kinds = ("gaussian_bump", "bspline_cubic", "poly_cutoff")
    centers = np.linspace(-D - 0.5, D + 0.5, 12)
    poly_coeffs = [(1.0, 0.5), (1.0, -0.3, 0.4), (0.5, 1.0), (1.0, 0.0, -0.5, 0.3)]
    out = []
    for j, c in enumerate(centers):
        kind = kinds[j % 3]
        width = float(np.clip(D + 1.0 - abs(c), 0.5, 1.0))
        coeffs = poly_coeffs[j // 3] if kind == "poly_cutoff" else (1.0,)
        out.append(TestFunction(kind, float(c), width, coeffs))
    return out
