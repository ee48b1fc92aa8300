"""Hot O(N^2) kernels: pairwise squared-exponential sums and log-sum-exps.

Both operations are written twice: a fused numba version (used when numba
imports cleanly) and a blocked numpy fallback.  The numba variants
parallelise over evaluation points only; each output element is accumulated
serially by one thread, so results do not depend on the thread count.
Everything stays in float64 because the sampler weight pipeline asserts
shift-invariance of normalised weights at 1e-12.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

try:  # fall back to the numpy path if numba is unavailable
    import numba as _nb

    # the default TBB layer is version-gated; workqueue is always present
    _nb.config.THREADING_LAYER = "workqueue"
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

__all__ = ["logsumexp_sqdist", "weighted_kernel_mean"]

_BLOCK = 2048


def _logsumexp_sqdist_numpy(points, centers, coef, log_weights):
    out = np.empty(points.shape[0])
    for start in range(0, points.shape[0], _BLOCK):
        stop = min(start + _BLOCK, points.shape[0])
        logk = -coef * cdist(points[start:stop], centers, "sqeuclidean")
        if log_weights is not None:
            logk = logk + log_weights[None, :]
        m = logk.max(axis=1)
        out[start:stop] = m + np.log(np.exp(logk - m[:, None]).sum(axis=1))
    return out


def _weighted_kernel_mean_numpy(x, y, wx, wy, coef):
    total = 0.0
    for start in range(0, x.shape[0], _BLOCK):
        stop = min(start + _BLOCK, x.shape[0])
        k = np.exp(-coef * cdist(x[start:stop], y, "sqeuclidean"))
        total += wx[start:stop] @ k @ wy
    return float(total)


if _HAVE_NUMBA:

    @_nb.njit(parallel=True, fastmath=False, cache=True)
    def _logsumexp_sqdist_nb(points, centers, coef, log_weights):  # pragma: no cover
        n = points.shape[0]
        m = centers.shape[0]
        d = points.shape[1]
        out = np.empty(n)
        for i in _nb.prange(n):
            best = -np.inf
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    diff = points[i, k] - centers[j, k]
                    acc += diff * diff
                v = -coef * acc + log_weights[j]
                if v > best:
                    best = v
            s = 0.0
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    diff = points[i, k] - centers[j, k]
                    acc += diff * diff
                s += np.exp(-coef * acc + log_weights[j] - best)
            out[i] = best + np.log(s)
        return out

    @_nb.njit(parallel=True, fastmath=False, cache=True)
    def _weighted_kernel_mean_nb(x, y, wx, wy, coef):  # pragma: no cover
        n = x.shape[0]
        m = y.shape[0]
        d = x.shape[1]
        rows = np.empty(n)
        for i in _nb.prange(n):
            s = 0.0
            for j in range(m):
                acc = 0.0
                for k in range(d):
                    diff = x[i, k] - y[j, k]
                    acc += diff * diff
                s += np.exp(-coef * acc) * wy[j]
            rows[i] = s
        total = 0.0
        for i in range(n):
            total += rows[i] * wx[i]
        return total


def logsumexp_sqdist(points: np.ndarray, centers: np.ndarray, coef: float,
                     log_weights: np.ndarray | None = None) -> np.ndarray:
    """``logsumexp_j (log_w_j - coef * ||x_i - c_j||^2)`` for every point i.

    ``log_weights`` defaults to uniform ``-log(n_centers)``.
    """
    points = np.ascontiguousarray(points, dtype=float)
    centers = np.ascontiguousarray(centers, dtype=float)
    if _HAVE_NUMBA:
        if log_weights is None:
            log_weights = np.full(centers.shape[0], -np.log(centers.shape[0]))
        return _logsumexp_sqdist_nb(points, centers, float(coef),
                                    np.ascontiguousarray(log_weights, dtype=float))
    if log_weights is None:
        return (_logsumexp_sqdist_numpy(points, centers, coef, None)
                - np.log(centers.shape[0]))
    return _logsumexp_sqdist_numpy(points, centers, coef, log_weights)


def weighted_kernel_mean(x: np.ndarray, y: np.ndarray, wx: np.ndarray,
                         wy: np.ndarray, coef: float = 0.5) -> float:
    """``sum_ij wx_i wy_j exp(-coef * ||x_i - y_j||^2)``."""
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    wx = np.ascontiguousarray(wx, dtype=float)
    wy = np.ascontiguousarray(wy, dtype=float)
    if _HAVE_NUMBA:
        return float(_weighted_kernel_mean_nb(x, y, wx, wy, float(coef)))
    return _weighted_kernel_mean_numpy(x, y, wx, wy, coef)
