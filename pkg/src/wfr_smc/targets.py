"""Target and initial distributions: Gaussians, Gaussian mixtures and the
geometric interpolation family between two endpoint densities.

Log-densities are defined only up to an additive constant; every algorithm in
this package consumes log-density differences or self-normalised weights.  For
a plain Gaussian the convention is the bare quadratic form (zero at the mode).
Mixtures keep the full component normalisers because the relative component
scales matter.
"""

from __future__ import annotations

import re

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky

from .particles import as_generator

__all__ = [
    "GaussianTarget",
    "GaussianMixtureTarget",
    "GeometricPathTarget",
    "UnsupportedTargetError",
    "bimodal",
    "four_mode",
    "gauss1d",
    "gauss2d_iso",
    "make_target",
]


class UnsupportedTargetError(ValueError):
    """Exact sampling (or another operation) is not available for this target."""


def _as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce x to shape (M, dim); second item says whether input was a single point."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got shape {arr.shape}")
    return arr, single


def _maybe_scalar(values: np.ndarray, single: bool):
    return float(values[0]) if single and values.ndim == 1 else (
        values[0] if single else values)


class GaussianTarget:
    """Gaussian N(mean, cov) with log-density normalised to zero at the mode."""

    def __init__(self, mean, cov):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 0:
            cov = cov * np.eye(self.mean.size)
        self.cov = 0.5 * (cov + cov.T)
        if self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError("covariance shape does not match mean")
        # fails for non-SPD input
        self._chol_lower = cholesky(self.cov, lower=True)
        self._cho = cho_factor(self.cov, lower=True)

    @property
    def dim(self) -> int:
        return self.mean.size

    def log_density(self, x):
        pts, single = _as_points(x, self.dim)
        centered = pts - self.mean
        solved = cho_solve(self._cho, centered.T).T
        vals = -0.5 * np.einsum("ij,ij->i", centered, solved)
        return _maybe_scalar(vals, single)

    def grad_log_density(self, x):
        pts, single = _as_points(x, self.dim)
        grads = -cho_solve(self._cho, (pts - self.mean).T).T
        return _maybe_scalar(grads, single)

    def sample(self, n: int, rng) -> np.ndarray:
        gen = as_generator(rng)
        z = gen.standard_normal((n, self.dim))
        return self.mean + z @ self._chol_lower.T

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        return self.mean.copy(), self.cov.copy()


class GaussianMixtureTarget:
    """Mixture sum_k w_k N(m_k, C_k) with cached Cholesky factors per component."""

    def __init__(self, weights, means, covs):
        self.weights = np.asarray(weights, dtype=float)
        if np.any(self.weights <= 0):
            raise ValueError("mixture weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        self.means = [np.atleast_1d(np.asarray(m, dtype=float)) for m in means]
        dim = self.means[0].size
        self.covs = []
        for c in covs:
            c = np.asarray(c, dtype=float)
            if c.ndim == 0:
                c = c * np.eye(dim)
            self.covs.append(0.5 * (c + c.T))
        self._chos = [cho_factor(c, lower=True) for c in self.covs]
        self._chol_lowers = [cholesky(c, lower=True) for c in self.covs]
        # log of w_k * full Gaussian normaliser
        self._log_consts = np.array([
            np.log(w) - 0.5 * (dim * np.log(2.0 * np.pi)
                               + 2.0 * np.log(np.diag(l)).sum())
            for w, l in zip(self.weights, self._chol_lowers)
        ])

    @property
    def dim(self) -> int:
        return self.means[0].size

    @property
    def n_components(self) -> int:
        return self.weights.size

    def _component_log_terms(self, pts: np.ndarray) -> np.ndarray:
        """(M, K) array of log(w_k N(x; m_k, C_k))."""
        terms = np.empty((pts.shape[0], self.n_components))
        for k in range(self.n_components):
            centered = pts - self.means[k]
            solved = cho_solve(self._chos[k], centered.T).T
            terms[:, k] = self._log_consts[k] - 0.5 * np.einsum(
                "ij,ij->i", centered, solved)
        return terms

    def log_density(self, x):
        pts, single = _as_points(x, self.dim)
        terms = self._component_log_terms(pts)
        m = terms.max(axis=1)
        vals = m + np.log(np.exp(terms - m[:, None]).sum(axis=1))
        return _maybe_scalar(vals, single)

    def grad_log_density(self, x):
        pts, single = _as_points(x, self.dim)
        terms = self._component_log_terms(pts)
        m = terms.max(axis=1, keepdims=True)
        resp = np.exp(terms - m)
        resp /= resp.sum(axis=1, keepdims=True)
        grads = np.zeros_like(pts)
        for k in range(self.n_components):
            comp_grad = -cho_solve(self._chos[k], (pts - self.means[k]).T).T
            grads += resp[:, k, None] * comp_grad
        return _maybe_scalar(grads, single)

    def sample(self, n: int, rng, return_indices: bool = False):
        gen = as_generator(rng)
        idx = gen.choice(self.n_components, size=n, p=self.weights)
        z = gen.standard_normal((n, self.dim))
        out = np.empty((n, self.dim))
        for k in range(self.n_components):
            mask = idx == k
            out[mask] = self.means[k] + z[mask] @ self._chol_lowers[k].T
        if return_indices:
            return out, idx
        return out

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mixture mean and covariance: sum w_k (C_k + m_k m_k^T) - m m^T."""
        mean = sum(w * m for w, m in zip(self.weights, self.means))
        second = sum(w * (c + np.outer(m, m))
                     for w, m, c in zip(self.weights, self.means, self.covs))
        return mean, second - np.outer(mean, mean)


class GeometricPathTarget:
    """Geometric interpolation with log-density (1-lam) log base + lam log tip."""

    def __init__(self, base, tip, lam: float):
        if not 0.0 <= lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if base.dim != tip.dim:
            raise ValueError("base and tip dimensions differ")
        self.base = base
        self.tip = tip
        self.lam = float(lam)

    @property
    def dim(self) -> int:
        return self.base.dim

    def log_density(self, x):
        return ((1.0 - self.lam) * np.asarray(self.base.log_density(x))
                + self.lam * np.asarray(self.tip.log_density(x)))

    def grad_log_density(self, x):
        return ((1.0 - self.lam) * np.asarray(self.base.grad_log_density(x))
                + self.lam * np.asarray(self.tip.grad_log_density(x)))

    def sample(self, n: int, rng) -> np.ndarray:
        if self.lam == 0.0:
            return self.base.sample(n, rng)
        if self.lam == 1.0:
            return self.tip.sample(n, rng)
        raise UnsupportedTargetError(
            "exact sampling undefined for geometric path with 0 < lambda < 1")


def gauss1d(m: float, c: float) -> GaussianTarget:
    """1D Gaussian preset, variance c."""
    return GaussianTarget([m], [[c]])


def gauss2d_iso(mx: float, my: float, c: float) -> GaussianTarget:
    """2D isotropic Gaussian preset, covariance c * I."""
    return GaussianTarget([mx, my], c * np.eye(2))


def bimodal(m: float) -> GaussianMixtureTarget:
    """Equal two-mode 1D mixture 0.5 N(0,1) + 0.5 N(m,1)."""
    return GaussianMixtureTarget([0.5, 0.5], [[0.0], [m]], [[[1.0]], [[1.0]]])


def four_mode() -> GaussianMixtureTarget:
    """Four well-separated 2D Gaussian modes with anisotropic covariances."""
    means = [(0.0, 8.0), (0.0, 2.0), (-3.0, 5.0), (3.0, 5.0)]
    covs = [np.diag([1.2, 0.01]), np.diag([1.2, 0.01]),
            np.diag([0.01, 2.0]), np.diag([0.01, 2.0])]
    return GaussianMixtureTarget([0.25] * 4, means, covs)


_PRESETS = {
    "gauss1d": (gauss1d, 2),
    "gauss2d_iso": (gauss2d_iso, 3),
    "bimodal": (bimodal, 1),
    "four_mode": (four_mode, 0),
}


def make_target(spec: str):
    """Build a target from a preset string, e.g. ``"gauss1d(0, 1)"`` or ``"four_mode"``.

    Recognised presets: gauss1d(m, c), gauss2d_iso(mx, my, c), bimodal(m),
    four_mode.
    """
    spec = spec.strip()
    match = re.fullmatch(r"([a-zA-Z_][a-zA-Z0-9_]*)\s*(?:\(([^)]*)\))?", spec)
    if match is None:
        raise ValueError(f"malformed target preset: {spec!r}")
    name, argstr = match.group(1), match.group(2)
    if name not in _PRESETS:
        raise ValueError(f"unknown target preset: {name!r}")
    factory, n_args = _PRESETS[name]
    args = []
    if argstr is not None and argstr.strip():
        args = [float(a) for a in argstr.split(",")]
    if len(args) != n_args:
        raise ValueError(
            f"preset {name!r} expects {n_args} parameter(s), got {len(args)}")
    return factory(*args)
