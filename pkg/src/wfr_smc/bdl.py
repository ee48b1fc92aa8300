"""Birth-death Langevin baselines.

Each iteration is a Langevin move followed by a stochastic kill/duplicate
sweep whose rates compare a kernel-density estimate of the particle cloud
against the target, then a restoration pass that brings the population back
to exactly N.  Two rate variants are provided: ``pde`` centres the raw rates
by their mean; ``kl`` adds the normalised-kernel correction term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ._kernels import logsumexp_sqdist
from .particles import ParticleSystem, StepSize, as_generator

__all__ = [
    "BdlConfig",
    "PopulationCollapseError",
    "bdl_rates",
    "bdl_step",
    "kde_log_density",
    "run_bdl",
]

RATE_VARIANTS = ("pde", "kl")


class PopulationCollapseError(RuntimeError):
    """Every particle was killed in a single birth-death sweep."""

    def __init__(self, iteration: int):
        super().__init__(f"all particles killed (iteration {iteration})")
        self.iteration = iteration


@dataclass
class BdlConfig:
    """Settings for the birth-death runs; ``kde_bandwidth`` defaults to gamma."""

    n_particles: int
    n_iterations: int
    gamma: float
    kde_bandwidth: float | None = None
    rate_variant: str = "pde"
    birth_death: bool = True  # disabled -> plain parallel Langevin chains

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("n_particles must be >= 2")
        StepSize(self.gamma)
        if self.kde_bandwidth is None:
            self.kde_bandwidth = self.gamma
        if self.kde_bandwidth <= 0:
            raise ValueError("kde_bandwidth must be positive")
        if self.rate_variant not in RATE_VARIANTS:
            raise ValueError(f"unknown rate variant: {self.rate_variant!r}")


def _log_kernel_matrix(x: np.ndarray, centers: np.ndarray, h: float) -> np.ndarray:
    d = centers.shape[1]
    const = -0.5 * d * math.log(2.0 * math.pi * h * h)
    return const - cdist(x, centers, "sqeuclidean") / (2.0 * h * h)


def kde_log_density(x, particles: np.ndarray, h: float):
    """Log of the Gaussian kernel density estimate ``N^-1 sum_j K_h(x - x_j)``.

    ``h`` is the kernel standard deviation.  Accepts a single point or an
    (M, d) block; computed with a max-shift log-sum-exp.
    """
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    centers = np.atleast_2d(np.asarray(particles, dtype=float))
    pts = np.asarray(x, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    d = centers.shape[1]
    const = -0.5 * d * math.log(2.0 * math.pi * h * h)
    vals = logsumexp_sqdist(pts, centers, 1.0 / (2.0 * h * h)) + const
    return float(vals[0]) if single else vals


def bdl_rates(particles: np.ndarray, target, h: float,
              variant: str = "pde") -> np.ndarray:
    """Centred birth-death rates for the current cloud.

    ``pde``: beta_i = log KDE(x_i) - log pi(x_i), centred to zero mean.
    ``kl``:  adds ``sum_j K(x_i - x_j) / sum_l K(x_j - x_l) - 1`` on top.
    """
    pts = np.atleast_2d(np.asarray(particles, dtype=float))
    beta = kde_log_density(pts, pts, h) - np.atleast_1d(target.log_density(pts))
    beta_bar = beta - beta.mean()
    if variant == "pde":
        return beta_bar
    if variant == "kl":
        logk = _log_kernel_matrix(pts, pts, h)
        k = np.exp(logk - logk.max())
        col = k / k.sum(axis=0, keepdims=True)  # normalise over l for each j
        return beta_bar + col.sum(axis=1) - 1.0
    raise ValueError(f"unknown rate variant: {variant!r}")


def _birth_death_sweep(positions: np.ndarray, beta_bar: np.ndarray,
                       gamma: float, rng: np.random.Generator,
                       iteration: int = 0) -> np.ndarray:
    """Kill/duplicate in fixed index order, then restore the population to N.

    Particle i with positive rate is killed w.p. 1 - exp(-beta_i * gamma);
    with nonpositive rate it is duplicated w.p. 1 - exp(beta_i * gamma).
    Restoration kills or duplicates uniformly chosen particles without
    replacement (repeated passes if fewer than half the target survive).
    """
    n = positions.shape[0]
    u = rng.random(n)
    # both branches share 1 - exp(-|beta| gamma); the sign picks kill vs duplicate
    prob = -np.expm1(-np.abs(beta_bar) * gamma)
    kill = (beta_bar > 0) & (u < prob)
    dup = (beta_bar <= 0) & (u < prob)
    survivors = positions[~kill]
    if survivors.shape[0] == 0:
        raise PopulationCollapseError(iteration)
    pool = np.concatenate([survivors, positions[dup]], axis=0)
    while pool.shape[0] != n:
        n1 = pool.shape[0]
        if n1 > n:
            doomed = rng.choice(n1, size=n1 - n, replace=False)
            keep = np.ones(n1, dtype=bool)
            keep[doomed] = False
            pool = pool[keep]
        else:
            cloned = rng.choice(n1, size=min(n - n1, n1), replace=False)
            pool = np.concatenate([pool, pool[cloned]], axis=0)
    return pool


def bdl_step(particles: np.ndarray, target, gamma: float, h: float,
             variant: str, rng, birth_death: bool = True,
             iteration: int = 0) -> np.ndarray:
    """One Langevin move plus (optionally) the birth-death stage."""
    gen = as_generator(rng)
    pts = np.atleast_2d(np.asarray(particles, dtype=float))
    grad = np.atleast_2d(target.grad_log_density(pts))
    if not np.isfinite(grad).all():
        bad = int(np.argwhere(~np.isfinite(grad).all(axis=1))[0, 0])
        raise FloatingPointError(f"non-finite drift gradient at particle {bad}")
    moved = pts + gamma * grad + math.sqrt(2.0 * gamma) * gen.standard_normal(
        pts.shape)
    if not birth_death:
        return moved
    beta_bar = bdl_rates(moved, target, h, variant)
    return _birth_death_sweep(moved, beta_bar, gamma, gen, iteration)


def iterate_bdl(config: BdlConfig, mu0, target, rng):
    """Yields a uniformly weighted ParticleSystem after every iteration."""
    gen = as_generator(rng)
    positions = mu0.sample(config.n_particles, gen)
    yield ParticleSystem.uniform(positions, 0)
    for n in range(1, config.n_iterations + 1):
        positions = bdl_step(positions, target, config.gamma,
                             config.kde_bandwidth, config.rate_variant, gen,
                             config.birth_death, n)
        yield ParticleSystem.uniform(positions, n)


def run_bdl(config: BdlConfig, mu0, target, rng) -> list[ParticleSystem]:
    return list(iterate_bdl(config, mu0, target, rng))
