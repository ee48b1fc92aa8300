"""Tempering schedules lambda(s): [0, inf) -> [0, 1] and their integrals.

The reaction-step exponent over the n-th window [t, t + gamma] is

    delta_n = int_0^gamma e^(s - gamma) lambda(t + s) ds,

which reduces to 1 - e^(-gamma) for the constant-one schedule.  Exact formulas
are used for the constant, linear and exponential kinds; any other schedule
falls back to adaptive Simpson quadrature (tol 1e-10).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TemperingSchedule",
    "adaptive_simpson",
    "constant_one",
    "exponential",
    "linear_horizon",
    "optimal_one_over",
]


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-10,
                     max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature of ``f`` on [a, b] to absolute tolerance ``tol``."""
    if b <= a:
        return 0.0

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, eps, depth):
        x1 = 0.5 * (x0 + x2)
        xl = 0.5 * (x0 + x1)
        xr = 0.5 * (x1 + x2)
        fl = f(xl)
        fr = f(xr)
        left = simpson(x0, x1, f0, fl, f1)
        right = simpson(x1, x2, f1, fr, f2)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (recurse(x0, x1, f0, fl, f1, left, eps / 2.0, depth + 1)
                + recurse(x1, x2, f1, fr, f2, right, eps / 2.0, depth + 1))

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


@dataclass(frozen=True)
class TemperingSchedule:
    """Nondecreasing map of flow time into [0, 1].

    ``kind`` is one of ``constant_one``, ``linear_horizon`` (parameter:
    time horizon), ``exponential`` (parameter: rate alpha, which may be 0
    for the identically-zero schedule) or ``optimal_one_over``.
    """

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind == "linear_horizon" and not self.param > 0:
            raise ValueError("linear_horizon needs a positive horizon")
        if self.kind == "exponential" and self.param < 0:
            raise ValueError("exponential rate must be >= 0")
        if self.kind not in ("constant_one", "linear_horizon", "exponential",
                             "optimal_one_over"):
            raise ValueError(f"unknown schedule kind: {self.kind!r}")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "constant_one":
            out = np.ones_like(s)
        elif self.kind == "linear_horizon":
            out = np.clip(s / self.param, 0.0, 1.0)
        elif self.kind == "exponential":
            out = -np.expm1(-self.param * s)
        else:
            out = 1.0 - 1.0 / (2.0 + s)
        return float(out) if out.ndim == 0 else out

    def integral(self, a: float, b: float) -> float:
        """Exact (or Simpson) value of ``int_a^b lambda(s) ds``."""
        if b < a:
            raise ValueError("integration bounds must satisfy a <= b")
        if self.kind == "constant_one":
            return b - a
        if self.kind == "linear_horizon":
            h = self.param
            lo, hi = min(a, h), min(b, h)
            ramp = (hi * hi - lo * lo) / (2.0 * h)
            return ramp + max(b - h, 0.0) - max(a - h, 0.0)
        if self.kind == "exponential":
            alpha = self.param
            if alpha == 0.0:
                return 0.0
            return (b - a) - (math.exp(-alpha * a) - math.exp(-alpha * b)) / alpha
        return adaptive_simpson(lambda s: float(self(s)), a, b)

    def fr_window_exponent(self, t: float, gamma: float) -> float:
        """delta_n = int_0^gamma e^(s - gamma) lambda(t + s) ds, in [0, 1 - e^-gamma]."""
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.kind == "constant_one":
            return -math.expm1(-gamma)
        if self.kind == "linear_horizon":
            return self._linear_window(t, gamma)
        if self.kind == "exponential":
            alpha = self.param
            # int_0^g e^(s-g) (1 - e^(-alpha (t+s))) ds
            base = -math.expm1(-gamma)
            if alpha == 1.0:
                corr = math.exp(-t - gamma) * gamma
            else:
                corr = (math.exp(-alpha * t - gamma)
                        * math.expm1((1.0 - alpha) * gamma) / (1.0 - alpha))
            return base - corr
        return adaptive_simpson(
            lambda s: math.exp(s - gamma) * float(self(t + s)), 0.0, gamma)

    def _linear_window(self, t: float, gamma: float) -> float:
        h = self.param
        if t >= h:
            return -math.expm1(-gamma)
        s_star = min(h - t, gamma)
        # int_0^x e^s (t + s) ds = t (e^x - 1) + (x - 1) e^x + 1
        ramp = math.exp(-gamma) * (
            t * math.expm1(s_star) + (s_star - 1.0) * math.exp(s_star) + 1.0) / h
        tail = 0.0
        if s_star < gamma:
            tail = 1.0 - math.exp(s_star - gamma)
        return ramp + tail


def constant_one() -> TemperingSchedule:
    return TemperingSchedule("constant_one")


def linear_horizon(horizon: float) -> TemperingSchedule:
    return TemperingSchedule("linear_horizon", horizon)


def exponential(alpha: float) -> TemperingSchedule:
    return TemperingSchedule("exponential", alpha)


def optimal_one_over() -> TemperingSchedule:
    return TemperingSchedule("optimal_one_over")
