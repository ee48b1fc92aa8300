"""Particle samplers built on the propose/reweight/resample skeleton.

All samplers share one loop: (optionally) resample, move every particle with
a Markov proposal, then reweight.  They differ in the proposal and in the
weight function:

* `run_smc_wfr` -- Langevin proposal targeting pi; weights raise pi over the
  empirical convolution of the pre-noise drift points to the power
  ``1 - exp(-gamma)`` (the exact reaction-step exponent).
* `run_tempered_smc_wfr` -- tempered Langevin proposal; same weight shape
  with the window-integral exponent ``delta_n``.
* `run_tempering_smc` -- tempered Langevin proposal with the classic
  bridge-ratio weights ``(pi/mu0)^(lambda_n - lambda_{n-1})``, O(1) per
  particle.
* `run_unit_fr_smc` -- random walk Metropolis invariant for the previous
  bridge distribution, with the same bridge-ratio weights.
* `run_ula` / `run_tempered_ula` -- unweighted parallel chains (no
  resampling, no reweighting), the diffusion-only baselines.

Runs are deterministic given (config, seed): every iteration draws, in fixed
order, the resampling indices, one (N, d) noise block and (for the Metropolis
kernel) one block of N uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import logsumexp_sqdist
from .gaussian_flows import GaussianState, as_state
from .particles import (DegenerateWeightsError, ParticleSystem, StepSize,
                        as_generator, normalize_log_weights, resample)
from .schedules import TemperingSchedule

__all__ = [
    "SamplerConfig",
    "SamplerDivergenceError",
    "mirror_descent_gaussian",
    "run_smc_wfr",
    "run_tempered_smc_wfr",
    "run_tempering_smc",
    "run_ula",
    "run_tempered_ula",
    "run_unit_fr_smc",
    "rwm_sweep",
    "tempered_ula_step",
    "tempered_wfr_log_weight",
    "ula_step",
    "wfr_log_weight",
]

RESAMPLING_SCHEMES = ("multinomial", "systematic")


class SamplerDivergenceError(RuntimeError):
    """A sampler produced degenerate weights or lost its population."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass
class SamplerConfig:
    """Shared sampler settings.

    ``resample_policy`` is ``"always"`` (resample unconditionally on every
    iteration after the first, as in the reference algorithm) or
    ``"ess_threshold"`` (resample only when ESS/N drops below
    ``ess_threshold``).  ``rwm_sigma`` is only read by the Metropolis-kernel
    sampler; the proposal scale is not prescribed anywhere, so the default
    is a fixed, documented 0.5.
    """

    n_particles: int
    n_iterations: int
    gamma: float
    schedule: TemperingSchedule | None = None
    resampling: str = "multinomial"
    resample_policy: str = "always"
    ess_threshold: float = 0.5
    rwm_sigma: float = 0.5

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.n_iterations < 0:
            raise ValueError("n_iterations must be >= 0")
        StepSize(self.gamma)  # validates positivity
        if self.resampling not in RESAMPLING_SCHEMES:
            raise ValueError(f"unknown resampling scheme: {self.resampling!r}")
        if self.resample_policy not in ("always", "ess_threshold"):
            raise ValueError(f"unknown resample policy: {self.resample_policy!r}")
        if self.resample_policy == "ess_threshold" and not 0 < self.ess_threshold <= 1:
            raise ValueError("ess_threshold must lie in (0, 1]")
        if self.rwm_sigma <= 0:
            raise ValueError("rwm_sigma must be positive")


# ---------------------------------------------------------------------------
# single steps


def _check_finite_grad(grad: np.ndarray) -> None:
    if not np.isfinite(grad).all():
        bad = int(np.argwhere(~np.isfinite(grad).all(axis=1))[0, 0])
        raise FloatingPointError(f"non-finite drift gradient at particle {bad}")


def ula_step(ps: ParticleSystem, target, gamma: float, rng):
    """One unadjusted Langevin move of every particle.

    Returns the moved system (weights unchanged) and the pre-noise drift
    points ``x + gamma * grad_log_pi(x)``, which the reweighting step needs
    as the centres of its convolution mixture.
    """
    gen = as_generator(rng)
    grad = np.atleast_2d(target.grad_log_density(ps.positions))
    _check_finite_grad(grad)
    drift = ps.positions + gamma * grad
    noise = gen.standard_normal(ps.positions.shape)
    moved = drift + math.sqrt(2.0 * gamma) * noise
    return ParticleSystem(moved, ps.log_weights.copy(), ps.iteration), drift


def tempered_ula_step(ps: ParticleSystem, mu0, pi, lambda_n: float,
                      gamma: float, rng):
    """Langevin move whose drift interpolates the two endpoint score fields."""
    if not 0.0 <= lambda_n <= 1.0:
        raise ValueError("lambda_n must lie in [0, 1]")
    gen = as_generator(rng)
    grad = ((1.0 - lambda_n) * np.atleast_2d(mu0.grad_log_density(ps.positions))
            + lambda_n * np.atleast_2d(pi.grad_log_density(ps.positions)))
    _check_finite_grad(grad)
    drift = ps.positions + gamma * grad
    noise = gen.standard_normal(ps.positions.shape)
    moved = drift + math.sqrt(2.0 * gamma) * noise
    return ParticleSystem(moved, ps.log_weights.copy(), ps.iteration), drift


def _log_convolution_mixture(points: np.ndarray, centers: np.ndarray,
                             gamma: float,
                             log_mix_weights: np.ndarray | None = None) -> np.ndarray:
    """log of sum_i w_i N(x; center_i, 2 gamma I), evaluated at each point.

    Uniform mixture weights when ``log_mix_weights`` is None.  The O(N^2)
    pass runs through the deterministic fused kernel.
    """
    d = centers.shape[1]
    log_const = -0.5 * d * math.log(4.0 * math.pi * gamma)
    return logsumexp_sqdist(points, centers, 1.0 / (4.0 * gamma),
                            log_mix_weights) + log_const


def wfr_log_weight(x, drift_points, target, gamma: float,
                   log_mix_weights: np.ndarray | None = None):
    """Log importance weight of the combined-flow reweighting step.

    ``(1 - e^-gamma) * [log pi(x) - log sum_i w_i N(x; drift_i, 2 gamma I)]``
    with uniform mixture weights by default.  Accepts a single point or an
    (M, d) block of points.
    """
    return tempered_wfr_log_weight(x, drift_points, target, gamma,
                                   -math.expm1(-gamma), log_mix_weights)


def tempered_wfr_log_weight(x, drift_points, target, gamma: float,
                            delta: float,
                            log_mix_weights: np.ndarray | None = None):
    """Same as `wfr_log_weight` with exponent ``delta`` from the schedule window."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    centers = np.atleast_2d(np.asarray(drift_points, dtype=float))
    if centers.shape[0] == 0:
        raise ValueError("empty drift point set")
    if not -1e-12 <= delta <= -math.expm1(-gamma) + 1e-12:
        raise ValueError(f"delta={delta} outside [0, 1 - e^-gamma]")
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    log_pi = np.atleast_1d(target.log_density(pts))
    log_mix = _log_convolution_mixture(pts, centers, gamma, log_mix_weights)
    values = delta * (log_pi - log_mix)
    return float(values[0]) if single else values


def mirror_descent_gaussian(mu, pi, delta: float) -> GaussianState:
    """Exact geometric-mixture step on Gaussians: mu^(1-delta) pi^delta.

    The result has precision ``(1-delta) C_mu^-1 + delta C_pi^-1`` and the
    matching natural-parameter mean; delta=0 returns mu and delta=1 pi.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    mu = as_state(mu)
    pi = as_state(pi)
    if delta == 0.0:
        return mu
    if delta == 1.0:
        return pi
    np.linalg.cholesky(mu.cov)
    np.linalg.cholesky(pi.cov)
    prec_mu = np.linalg.inv(mu.cov)
    prec_pi = np.linalg.inv(pi.cov)
    prec = (1.0 - delta) * prec_mu + delta * prec_pi
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ ((1.0 - delta) * prec_mu @ mu.mean + delta * prec_pi @ pi.mean)
    return GaussianState(mean, cov, mu.time)


# ---------------------------------------------------------------------------
# run loops


def _uniform_weights(log_weights: np.ndarray) -> bool:
    return bool(np.all(log_weights == log_weights[0]))


def _should_resample(ps: ParticleSystem, config: SamplerConfig) -> bool:
    if config.resample_policy == "always":
        return True
    return ps.ess() / ps.n_particles < config.ess_threshold


def _smc_loop(config: SamplerConfig, init_positions: np.ndarray, gen,
              propose, weight_increment):
    """Shared resample / propose / reweight loop; yields one system per iteration."""
    ps = ParticleSystem.uniform(init_positions, 0)
    yield ps
    flat_streak = 0
    for n in range(1, config.n_iterations + 1):
        if n > 1 and _should_resample(ps, config):
            ps = resample(ps, config.resampling, gen)
        moved, drift = propose(ps, n, gen)
        if _uniform_weights(ps.log_weights):
            mix_logw = None
        else:
            mix_logw = np.log(normalize_log_weights(ps.log_weights)[0])
        increment = weight_increment(moved.positions, drift, n, mix_logw)
        new_lw = ps.log_weights + increment
        try:
            probs, _ = normalize_log_weights(new_lw)
        except DegenerateWeightsError as exc:
            raise SamplerDivergenceError(str(exc), n) from exc
        flat_streak = flat_streak + 1 if probs.max() >= 1.0 - 1e-15 else 0
        if flat_streak >= 3:
            raise SamplerDivergenceError(
                "weights collapsed onto a single particle for 3 consecutive "
                "iterations", n)
        ps = ParticleSystem(moved.positions, new_lw, n)
        yield ps


def _require_mixture_capable(config: SamplerConfig) -> None:
    if config.n_particles < 2:
        raise ValueError(
            "mixture-denominator weights need at least 2 particles")


def iterate_smc_wfr(config: SamplerConfig, mu0, pi, rng):
    """Generator form of `run_smc_wfr`; yields the state after every iteration."""
    _require_mixture_capable(config)
    gen = as_generator(rng)
    init = mu0.sample(config.n_particles, gen)

    def propose(ps, n, g):
        return ula_step(ps, pi, config.gamma, g)

    def increment(positions, drift, n, mix_logw):
        return wfr_log_weight(positions, drift, pi, config.gamma, mix_logw)

    yield from _smc_loop(config, init, gen, propose, increment)


def run_smc_wfr(config: SamplerConfig, mu0, pi, rng) -> list[ParticleSystem]:
    """Propose with Langevin steps toward pi, reweight with the convolution
    denominator, resample; the discrete combined-flow sampler."""
    return list(iterate_smc_wfr(config, mu0, pi, rng))


def _window_exponents(config: SamplerConfig, n: int) -> tuple[float, float]:
    schedule = config.schedule
    lam_n = float(schedule(n * config.gamma))
    delta_n = schedule.fr_window_exponent((n - 1) * config.gamma, config.gamma)
    return lam_n, delta_n


def iterate_tempered_smc_wfr(config: SamplerConfig, mu0, pi, rng):
    _require_mixture_capable(config)
    if config.schedule is None:
        raise ValueError("tempered sampler needs a schedule")
    gen = as_generator(rng)
    init = mu0.sample(config.n_particles, gen)

    def propose(ps, n, g):
        lam_n, _ = _window_exponents(config, n)
        return tempered_ula_step(ps, mu0, pi, lam_n, config.gamma, g)

    def increment(positions, drift, n, mix_logw):
        _, delta_n = _window_exponents(config, n)
        return tempered_wfr_log_weight(positions, drift, pi, config.gamma,
                                       delta_n, mix_logw)

    yield from _smc_loop(config, init, gen, propose, increment)


def run_tempered_smc_wfr(config: SamplerConfig, mu0, pi, rng) -> list[ParticleSystem]:
    """Tempered Langevin proposal with the window-integral reweighting exponent."""
    return list(iterate_tempered_smc_wfr(config, mu0, pi, rng))


def iterate_tempering_smc(config: SamplerConfig, mu0, pi, rng):
    if config.schedule is None:
        raise ValueError("tempering SMC needs a schedule")
    gen = as_generator(rng)
    init = mu0.sample(config.n_particles, gen)
    schedule = config.schedule

    def propose(ps, n, g):
        lam_n = float(schedule(n * config.gamma))
        return tempered_ula_step(ps, mu0, pi, lam_n, config.gamma, g)

    def increment(positions, drift, n, mix_logw):
        lam_n = float(schedule(n * config.gamma))
        lam_prev = float(schedule((n - 1) * config.gamma))
        if lam_n == lam_prev:
            return np.zeros(positions.shape[0])
        ratio = (np.atleast_1d(pi.log_density(positions))
                 - np.atleast_1d(mu0.log_density(positions)))
        return (lam_n - lam_prev) * ratio

    yield from _smc_loop(config, init, gen, propose, increment)


def run_tempering_smc(config: SamplerConfig, mu0, pi, rng) -> list[ParticleSystem]:
    """Classic geometric-bridge SMC: tempered Langevin proposal and O(1)
    bridge-ratio weights."""
    return list(iterate_tempering_smc(config, mu0, pi, rng))


def rwm_sweep(positions: np.ndarray, log_density, sigma: float, rng) -> np.ndarray:
    """One random-walk Metropolis sweep with a N(0, sigma^2 I) proposal.

    Each particle's proposal is accepted with probability
    ``min(1, density(x') / density(x))``.
    """
    if sigma <= 0:
        raise ValueError("proposal sigma must be positive")
    gen = as_generator(rng)
    proposal = positions + sigma * gen.standard_normal(positions.shape)
    log_ratio = (np.atleast_1d(log_density(proposal))
                 - np.atleast_1d(log_density(positions)))
    accept = np.log(gen.random(positions.shape[0])) < log_ratio
    return np.where(accept[:, None], proposal, positions)


def iterate_unit_fr_smc(config: SamplerConfig, mu0, pi, rng):
    """Bridge sampler on the unit grid s_n = n / T with a Metropolis kernel.

    The move at iteration n is one random-walk Metropolis sweep invariant for
    the bridge at lambda_{n-1}; the weights bridge from lambda_{n-1} to
    lambda_n.
    """
    if config.schedule is None:
        raise ValueError("unit-time sampler needs a schedule")
    gen = as_generator(rng)
    init = mu0.sample(config.n_particles, gen)
    schedule = config.schedule
    big_t = config.n_iterations

    def bridge_logpdf(positions, lam):
        return ((1.0 - lam) * np.atleast_1d(mu0.log_density(positions))
                + lam * np.atleast_1d(pi.log_density(positions)))

    def propose(ps, n, g):
        lam_prev = float(schedule((n - 1) / big_t))
        new_pos = rwm_sweep(ps.positions,
                            lambda x: bridge_logpdf(x, lam_prev),
                            config.rwm_sigma, g)
        return ParticleSystem(new_pos, ps.log_weights.copy(), ps.iteration), None

    def increment(positions, drift, n, mix_logw):
        lam_n = float(schedule(n / big_t))
        lam_prev = float(schedule((n - 1) / big_t))
        if lam_n == lam_prev:
            return np.zeros(positions.shape[0])
        ratio = (np.atleast_1d(pi.log_density(positions))
                 - np.atleast_1d(mu0.log_density(positions)))
        return (lam_n - lam_prev) * ratio

    yield from _smc_loop(config, init, gen, propose, increment)


def run_unit_fr_smc(config: SamplerConfig, mu0, pi, rng) -> list[ParticleSystem]:
    return list(iterate_unit_fr_smc(config, mu0, pi, rng))


def iterate_ula(config: SamplerConfig, pi, rng, mu0=None):
    """N independent unweighted Langevin chains (no resampling, no weights)."""
    gen = as_generator(rng)
    source = mu0 if mu0 is not None else pi
    init = source.sample(config.n_particles, gen)
    ps = ParticleSystem.uniform(init, 0)
    yield ps
    for n in range(1, config.n_iterations + 1):
        moved, _ = ula_step(ps, pi, config.gamma, gen)
        ps = ParticleSystem(moved.positions, ps.log_weights, n)
        yield ps


def run_ula(config: SamplerConfig, pi, rng, mu0=None) -> list[ParticleSystem]:
    return list(iterate_ula(config, pi, rng, mu0))


def iterate_tempered_ula(config: SamplerConfig, mu0, pi, rng):
    """Unweighted parallel chains driven by the moving interpolated target."""
    if config.schedule is None:
        raise ValueError("tempered chains need a schedule")
    gen = as_generator(rng)
    init = mu0.sample(config.n_particles, gen)
    ps = ParticleSystem.uniform(init, 0)
    yield ps
    for n in range(1, config.n_iterations + 1):
        lam_n = float(config.schedule(n * config.gamma))
        moved, _ = tempered_ula_step(ps, mu0, pi, lam_n, config.gamma, gen)
        ps = ParticleSystem(moved.positions, ps.log_weights, n)
        yield ps


def run_tempered_ula(config: SamplerConfig, mu0, pi, rng) -> list[ParticleSystem]:
    return list(iterate_tempered_ula(config, mu0, pi, rng))
