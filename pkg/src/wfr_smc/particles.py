"""Weighted particle systems, seeded random streams and log-domain weight arithmetic.

All weights in this package live in log space and are only ever exponentiated
after a max-shift normalisation, so that targets known up to a constant and
N-term mixture densities never underflow.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
import math

import numpy as np

__all__ = [
    "DegenerateWeightsError",
    "ParticleSystem",
    "RngStream",
    "StepSize",
    "effective_sample_size",
    "normalize_log_weights",
    "resample",
]


class DegenerateWeightsError(RuntimeError):
    """All particle weights are zero (every log-weight is -inf)."""


def normalize_log_weights(log_weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Normalise a vector of unnormalised log-weights.

    Parameters
    ----------
    log_weights : array of shape (N,)
        Unnormalised log-weights; entries may be ``-inf`` but not ``nan``
        or ``+inf``.

    Returns
    -------
    probabilities : array of shape (N,)
        Normalised weights, summing to one.
    log_normalizer : float
        ``logsumexp(log_weights)``.

    Notes
    -----
    Uses the max-shift log-sum-exp.  The result is invariant (to ~1e-15)
    under adding a constant to every entry, and deterministic for fixed
    inputs, which the reproducibility tests rely on.
    """
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise ValueError("log_weights must be a nonempty 1-d array")
    if np.isnan(lw).any() or np.isposinf(lw).any():
        raise ValueError("log_weights must be finite or -inf")
    m = np.max(lw)
    if np.isneginf(m):
        raise DegenerateWeightsError("all log-weights are -inf")
    shifted = np.exp(lw - m)
    total = float(np.sum(shifted))
    probabilities = shifted / total
    return probabilities, float(m + math.log(total))


def effective_sample_size(probabilities: np.ndarray) -> float:
    """Return ``1 / sum(p_i^2)`` for a normalised weight vector; lies in [1, N]."""
    p = np.asarray(probabilities, dtype=float)
    return float(1.0 / np.sum(p * p))


@dataclass(frozen=True)
class RngStream:
    """Seeded random stream identified by ``(seed, stream_id)``.

    Identical ``(seed, stream_id)`` pairs yield generators producing
    identical draws; distinct stream ids give independent-quality streams.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(ss)

    def child(self, k: int) -> "RngStream":
        """Substream ``k`` of this stream (for per-replicate or per-particle use)."""
        return RngStream(self.seed, self.stream_id * 65536 + 1 + k)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator (or a duck-typed double), or an int seed."""
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    if hasattr(rng, "standard_normal"):
        return rng
    raise TypeError(f"cannot interpret {type(rng).__name__} as a random generator")


@dataclass(frozen=True)
class StepSize:
    """Flow time step ``gamma > 0``; ``delta = 1 - exp(-gamma)`` is the
    reweighting exponent of the exact reaction-step solution and lies in (0, 1)."""

    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise ValueError(f"gamma must be a positive finite real, got {self.gamma}")

    @property
    def delta(self) -> float:
        return -math.expm1(-self.gamma)


@dataclass(frozen=True)
class ParticleSystem:
    """N weighted particles in R^d.

    ``positions`` has shape (N, d); ``log_weights`` has shape (N,) and is
    unnormalised.  Instances are treated as values: samplers return new
    systems instead of mutating.
    """

    positions: np.ndarray
    log_weights: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        lw = np.asarray(self.log_weights, dtype=float)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "log_weights", lw)
        if pos.ndim != 2 or pos.shape[0] < 1:
            raise ValueError("positions must be an (N, d) array with N >= 1")
        if lw.shape != (pos.shape[0],):
            raise ValueError("log_weights must have shape (N,)")
        if not np.isfinite(pos).all():
            raise ValueError("positions must be finite")
        if self.iteration < 0:
            raise ValueError("iteration must be nonnegative")

    @property
    def n_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def normalized_weights(self) -> np.ndarray:
        return normalize_log_weights(self.log_weights)[0]

    def ess(self) -> float:
        return effective_sample_size(self.normalized_weights())

    def weighted_mean(self) -> np.ndarray:
        return self.normalized_weights() @ self.positions

    def weighted_cov(self) -> np.ndarray:
        w = self.normalized_weights()
        centered = self.positions - w @ self.positions
        return (centered * w[:, None]).T @ centered

    @staticmethod
    def uniform(positions: np.ndarray, iteration: int = 0) -> "ParticleSystem":
        """System with the given positions and uniform (all-zero log) weights."""
        pos = np.asarray(positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        return ParticleSystem(pos, np.zeros(pos.shape[0]), iteration)

    def with_iteration(self, iteration: int) -> "ParticleSystem":
        return replace(self, iteration=iteration)


def _resample_indices(probabilities: np.ndarray, scheme: str,
                      rng: np.random.Generator) -> np.ndarray:
    n = probabilities.shape[0]
    if scheme == "multinomial":
        # i.i.d. categorical draws, as in the unconditional-resampling algorithm
        return rng.choice(n, size=n, replace=True, p=probabilities)
    if scheme == "systematic":
        # single uniform offset, stratified inversion of the weight CDF
        cdf = np.cumsum(probabilities)
        cdf[-1] = 1.0
        points = (np.arange(n) + rng.random()) / n
        return np.searchsorted(cdf, points, side="right").clip(max=n - 1)
    raise ValueError(f"unknown resampling scheme: {scheme!r}")


def resample(ps: ParticleSystem, scheme: str, rng) -> ParticleSystem:
    """Draw N particles from the weighted atoms; output weights are uniform.

    ``scheme`` is ``"multinomial"`` (i.i.d. categorical) or ``"systematic"``
    (stratified inversion with a single uniform offset).
    """
    gen = as_generator(rng)
    probabilities = ps.normalized_weights()
    idx = _resample_indices(probabilities, scheme, gen)
    return ParticleSystem(ps.positions[idx], np.zeros(ps.n_particles), ps.iteration)
