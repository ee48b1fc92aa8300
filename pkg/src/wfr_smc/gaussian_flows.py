"""Exact Gaussian moment evolution for the flows used as sampler ground truth.

For a Gaussian initial condition and Gaussian target every flow here preserves
gaussianity, so each one reduces to an ODE for (mean, covariance).  Printed
closed forms exist for the diffusion flow (any d), the reaction flow (any d),
its unit-time rescaling (any d), the combined flow in 1D, and the tempered
diffusion flow in 1D; everything else is integrated with fixed-step RK4.

Flow kinds
----------
``w``             diffusion (Fokker-Planck / Langevin) flow
``fr``            reaction (birth-death / replicator) flow
``unit_fr``       reaction flow rescaled to the unit time interval
``wfr``           sum of ``w`` and ``fr``
``tempered_w``    diffusion flow with moving geometric-mixture target
``tempered_fr``   reaction flow with moving target
``tempered_wfr``  sum of the two tempered flows
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .schedules import TemperingSchedule, adaptive_simpson

__all__ = [
    "FLOW_KINDS",
    "GaussianState",
    "IntegrationBlowupError",
    "evolve",
    "gaussian_kl",
    "moment_rhs",
    "unit_fr_time_rescaling_check",
]

FLOW_KINDS = ("w", "fr", "unit_fr", "wfr", "tempered_w", "tempered_fr",
              "tempered_wfr")
_TEMPERED = ("tempered_w", "tempered_fr", "tempered_wfr")

_RK4_MAX_STEP = 1e-3


class IntegrationBlowupError(RuntimeError):
    """Moment integration produced a non-SPD covariance."""


@dataclass(frozen=True)
class GaussianState:
    """Gaussian moments (mean, covariance) at a given flow time."""

    mean: np.ndarray
    cov: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if cov.ndim == 0:
            cov = cov * np.eye(mean.size)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("covariance shape does not match mean")

    @property
    def dim(self) -> int:
        return self.mean.size


def as_state(obj, time: float = 0.0) -> GaussianState:
    """Coerce a GaussianState or any object with .mean/.cov into a GaussianState."""
    if isinstance(obj, GaussianState):
        return obj
    return GaussianState(obj.mean, obj.cov, time)


def _precision(cov: np.ndarray) -> np.ndarray:
    prec = np.linalg.inv(cov)
    return 0.5 * (prec + prec.T)


def _check_spd(cov: np.ndarray, time: float) -> None:
    if np.min(np.linalg.eigvalsh(cov)) <= 0.0:
        raise IntegrationBlowupError(
            f"covariance lost positive definiteness at t={time:.6g}")


def moment_rhs(kind: str, state: GaussianState, pi: GaussianState,
               mu0: GaussianState | None = None,
               lambda_t: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side (dm/dt, dC/dt) for the requested flow.

    ``lambda_t`` is ignored by the untempered kinds; tempered kinds also
    need ``mu0``.  ``unit_fr`` has its own closed form and is rejected here.
    """
    if kind == "unit_fr":
        raise ValueError("unit_fr has a closed form; moment_rhs is undefined for it")
    if kind not in FLOW_KINDS:
        raise ValueError(f"unknown flow kind: {kind!r}")
    m, c = state.mean, state.cov
    lam_pi = _precision(pi.cov)
    d = state.dim
    eye = np.eye(d)

    if kind in ("w", "fr", "wfr"):
        drift = lam_pi @ (m - pi.mean)
        dm = np.zeros(d)
        dc = np.zeros((d, d))
        if kind in ("w", "wfr"):
            dm += -drift
            dc += -lam_pi @ c - c @ lam_pi + 2.0 * eye
        if kind in ("fr", "wfr"):
            dm += -c @ drift
            dc += -c @ lam_pi @ c + c
        return dm, dc

    if mu0 is None:
        raise ValueError("tempered kinds need the initial distribution mu0")
    if not 0.0 <= lambda_t <= 1.0:
        raise ValueError("lambda_t must lie in [0, 1]")
    lam0 = _precision(mu0.cov)
    # moving target: precision and natural mean of the geometric mixture
    p_inv = lambda_t * lam_pi + (1.0 - lambda_t) * lam0
    q = (1.0 - lambda_t) * lam0 @ mu0.mean + lambda_t * lam_pi @ pi.mean
    pull = p_inv @ m - q
    dm = np.zeros(d)
    dc = np.zeros((d, d))
    if kind in ("tempered_w", "tempered_wfr"):
        dm += -pull
        dc += -p_inv @ c - c @ p_inv + 2.0 * eye
    if kind in ("tempered_fr", "tempered_wfr"):
        dm += -c @ pull
        dc += -c @ p_inv @ c + c
    return dm, dc


# ---------------------------------------------------------------------------
# closed forms


def _w_closed(t: float, mu0: GaussianState, pi: GaussianState) -> GaussianState:
    evals, vecs = np.linalg.eigh(pi.cov)
    decay = np.exp(-t / evals)
    e_mat = (vecs * decay) @ vecs.T
    mean = e_mat @ mu0.mean + (np.eye(mu0.dim) - e_mat) @ pi.mean
    station = (vecs * (evals * (1.0 - decay ** 2))) @ vecs.T
    cov = e_mat @ mu0.cov @ e_mat + station
    return GaussianState(mean, cov, t)


def _fr_closed(t: float, mu0: GaussianState, pi: GaussianState) -> GaussianState:
    lam0 = _precision(mu0.cov)
    lam_pi = _precision(pi.cov)
    prec = lam_pi + math.exp(-t) * (lam0 - lam_pi)
    cov = np.linalg.inv(prec)
    mean = pi.mean + math.exp(-t) * cov @ lam0 @ (mu0.mean - pi.mean)
    return GaussianState(mean, cov, t)


def _unit_fr_closed(t: float, mu0: GaussianState, pi: GaussianState) -> GaussianState:
    if not 0.0 <= t <= 1.0:
        raise ValueError("unit-time reaction flow is defined for t in [0, 1]")
    lam0 = _precision(mu0.cov)
    lam_pi = _precision(pi.cov)
    prec = (1.0 - t) * lam0 + t * lam_pi
    cov = np.linalg.inv(prec)
    mean = cov @ ((1.0 - t) * lam0 @ mu0.mean + t * lam_pi @ pi.mean)
    return GaussianState(mean, cov, t)


def _wfr_closed_1d(t: float, mu0: GaussianState, pi: GaussianState) -> GaussianState:
    c0 = float(mu0.cov[0, 0])
    cp = float(pi.cov[0, 0])
    m0 = float(mu0.mean[0])
    mp = float(pi.mean[0])
    rate = 1.0 + 2.0 / cp
    if abs(c0 - cp) < 1e-14:
        cov = cp
        mean = mp + (m0 - mp) * math.exp(-(cp + 1.0) * t / cp)
        return GaussianState([mean], [[cov]], t)
    k = 1.0 / (c0 - cp) + 1.0 / (cp + 2.0)
    denom = k * math.exp(rate * t) - 1.0 / (cp + 2.0)
    cov = cp + 1.0 / denom
    # (C_t - C_pi) e^(t/C_pi) written without the overflowing product
    scaled = 1.0 / (k * math.exp((1.0 + 1.0 / cp) * t)
                    - math.exp(-t / cp) / (cp + 2.0))
    mean = mp + (m0 - mp) * scaled / (c0 - cp)
    return GaussianState([mean], [[cov]], t)


def _tempered_w_closed_1d(t: float, mu0: GaussianState, pi: GaussianState,
                          schedule: TemperingSchedule) -> GaussianState:
    c0 = float(mu0.cov[0, 0])
    cp = float(pi.cov[0, 0])
    m0 = float(mu0.mean[0])
    mp = float(pi.mean[0])

    def a_gap(u: float) -> float:
        # A(t) - A(u) with A the accumulated precision integral
        i1 = schedule.integral(u, t)
        i0 = (t - u) - i1
        return i0 / c0 + i1 / cp

    def mean_integrand(u: float) -> float:
        lam = float(schedule(u))
        q = (1.0 - lam) * m0 / c0 + lam * mp / cp
        return q * math.exp(-a_gap(u))

    def cov_integrand(u: float) -> float:
        return math.exp(-2.0 * a_gap(u))

    if t == 0.0:
        return GaussianState([m0], [[c0]], 0.0)
    mean = m0 * math.exp(-a_gap(0.0)) + adaptive_simpson(mean_integrand, 0.0, t)
    cov = c0 * math.exp(-2.0 * a_gap(0.0)) + 2.0 * adaptive_simpson(
        cov_integrand, 0.0, t)
    return GaussianState([mean], [[cov]], t)


_CLOSED = {"w": _w_closed, "fr": _fr_closed, "unit_fr": _unit_fr_closed}


def _has_closed_form(kind: str, dim: int) -> bool:
    if kind in _CLOSED:
        return True
    return kind in ("wfr", "tempered_w") and dim == 1


def _closed_form(kind: str, t: float, mu0: GaussianState, pi: GaussianState,
                 schedule: TemperingSchedule | None) -> GaussianState:
    if kind in _CLOSED:
        return _CLOSED[kind](t, mu0, pi)
    if kind == "wfr":
        return _wfr_closed_1d(t, mu0, pi)
    if kind == "tempered_w":
        return _tempered_w_closed_1d(t, mu0, pi, schedule)
    raise ValueError(f"no closed form for kind {kind!r} in this dimension")


# ---------------------------------------------------------------------------
# RK4 moment integration


def _rk4_rhs(kind: str, t: float, m: np.ndarray, c: np.ndarray,
             mu0: GaussianState, pi: GaussianState,
             schedule: TemperingSchedule | None):
    if kind == "unit_fr":
        # unit-time flow = reaction flow under the rescaling tau = -log(1 - t)
        dm, dc = moment_rhs("fr", GaussianState(m, c, t), pi)
        factor = 1.0 / (1.0 - t)
        return factor * dm, factor * dc
    lam = float(schedule(t)) if kind in _TEMPERED else 1.0
    dm, dc = moment_rhs(kind, GaussianState(m, c, t), pi, mu0, lam)
    return dm, 0.5 * (dc + dc.T)


def _rk4_segment(kind: str, m, c, t0: float, t1: float, step: float,
                 mu0, pi, schedule):
    n_sub = max(1, math.ceil((t1 - t0) / step))
    h = (t1 - t0) / n_sub
    t = t0
    for _ in range(n_sub):
        k1m, k1c = _rk4_rhs(kind, t, m, c, mu0, pi, schedule)
        k2m, k2c = _rk4_rhs(kind, t + 0.5 * h, m + 0.5 * h * k1m,
                            c + 0.5 * h * k1c, mu0, pi, schedule)
        k3m, k3c = _rk4_rhs(kind, t + 0.5 * h, m + 0.5 * h * k2m,
                            c + 0.5 * h * k2c, mu0, pi, schedule)
        k4m, k4c = _rk4_rhs(kind, t + h, m + h * k3m, c + h * k3c,
                            mu0, pi, schedule)
        m = m + (h / 6.0) * (k1m + 2.0 * k2m + 2.0 * k3m + k4m)
        c = c + (h / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
        c = 0.5 * (c + c.T)
        t += h
        _check_spd(c, t)
    return m, c


def evolve(kind: str, mu0, pi, t_grid, schedule: TemperingSchedule | None = None,
           method: str = "auto") -> list[GaussianState]:
    """Evolve Gaussian moments along a flow, evaluated on ``t_grid``.

    Parameters
    ----------
    kind : str
        One of `FLOW_KINDS`.
    mu0, pi : GaussianState or objects with .mean/.cov
        Initial distribution and target.
    t_grid : 1-d array
        Strictly increasing times starting at >= 0.
    schedule : TemperingSchedule, optional
        Required for the tempered kinds (and used by none of the others).
    method : {"auto", "closed_form", "rk4"}
        "auto" uses the closed form where one is available for this kind
        and dimension, and RK4 at step ``min(1e-3, spacing / 10)`` otherwise.
    """
    if kind not in FLOW_KINDS:
        raise ValueError(f"unknown flow kind: {kind!r}")
    mu0 = as_state(mu0)
    pi = as_state(pi)
    if mu0.dim != pi.dim:
        raise ValueError("mu0 and pi dimensions differ")
    grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if grid.size == 0 or grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("t_grid must be increasing and start at >= 0")
    if kind in _TEMPERED and schedule is None:
        raise ValueError(f"{kind} needs a tempering schedule")
    if kind == "unit_fr" and grid[-1] > 1.0:
        raise ValueError("unit-time reaction flow is defined for t in [0, 1]")

    use_closed = _has_closed_form(kind, mu0.dim)
    if method == "closed_form" and not use_closed:
        raise ValueError(f"no closed form for kind {kind!r} in dimension {mu0.dim}")
    if method == "rk4":
        use_closed = False
    elif method not in ("auto", "closed_form"):
        raise ValueError(f"unknown method: {method!r}")

    if use_closed:
        return [_closed_form(kind, float(t), mu0, pi, schedule) for t in grid]

    if kind == "unit_fr" and grid[-1] >= 1.0:
        raise ValueError("RK4 for the unit-time flow needs t < 1")
    spacing = np.min(np.diff(grid)) if grid.size > 1 else grid[-1] or 1.0
    step = min(_RK4_MAX_STEP, spacing / 10.0)
    states = []
    m, c = mu0.mean.copy(), mu0.cov.copy()
    t_prev = 0.0
    for t in grid:
        t = float(t)
        if t > t_prev:
            m, c = _rk4_segment(kind, m, c, t_prev, t, step, mu0, pi, schedule)
            t_prev = t
        states.append(GaussianState(m.copy(), c.copy(), t))
    return states


def gaussian_kl(a, b) -> float:
    """KL divergence between Gaussians, KL(a || b), standard closed form."""
    a = as_state(a)
    b = as_state(b)
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    chol_b = np.linalg.cholesky(b.cov)
    chol_a = np.linalg.cholesky(a.cov)
    solved = np.linalg.solve(b.cov, a.cov)
    diff = b.mean - a.mean
    maha = diff @ np.linalg.solve(b.cov, diff)
    logdet_ratio = 2.0 * (np.log(np.diag(chol_b)).sum()
                          - np.log(np.diag(chol_a)).sum())
    return float(0.5 * (np.trace(solved) + maha - a.dim + logdet_ratio))


def unit_fr_time_rescaling_check(mu0, pi, t: float):
    """Unit-time flow at ``t`` and the infinite-time flow at ``-log(1 - t)``.

    The two states agree exactly (deterministic time rescaling); callers
    assert componentwise closeness.
    """
    if not 0.0 <= t < 1.0:
        raise ValueError("t must lie in [0, 1)")
    mu0 = as_state(mu0)
    pi = as_state(pi)
    unit_state = _unit_fr_closed(t, mu0, pi)
    tau = -math.log1p(-t)
    rescaled = _fr_closed(tau, mu0, pi)
    return unit_state, rescaled
