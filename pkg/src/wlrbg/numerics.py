"""Dense matrix kernel shared by the solvers and the metrics.

Matrices are plain ``float64`` numpy arrays. Video data uses the
frames-as-columns convention: column ``j`` is frame ``j`` stacked
column-major.
"""
import logging
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .errors import ConfigError, DataError, SolverError


class SvdFactors(NamedTuple):
    """Thin SVD ``a = u @ diag(s) @ v.T``.

    ``v`` holds the right singular vectors as columns (cols x p), not the
    LAPACK ``vh`` layout.
    """

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def shape(self):
        return self.u.shape[0], self.v.shape[0]

    def reconstruct(self):
        return (self.u * self.s) @ self.v.T


def as_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise DataError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DataError(f"{name} contains NaN or infinite entries")
    return a


def frobenius(a):
    return float(np.linalg.norm(a, "fro")) if np.size(a) else 0.0


def svd(a):
    a = as_matrix(a)
    m, n = a.shape
    if a.size == 0:
        p = min(m, n)
        return SvdFactors(np.zeros((m, p)), np.zeros(p), np.zeros((n, p)))
    for driver in ("gesdd", "gesvd"):
        try:
            u, s, vh = scipy.linalg.svd(
                a, full_matrices=False, lapack_driver=driver, check_finite=False
            )
        except np.linalg.LinAlgError as exc:
            logging.debug(f"SVD with {driver} failed on {a.shape}: {exc}")
            continue
        return SvdFactors(u, s, vh.T)
    raise SolverError(f"SVD did not converge for a {m}x{n} matrix")


def truncate_rank(f, r):
    if r < 0:
        raise ConfigError(f"rank must be non-negative, got {r}")
    r = min(r, f.s.size)
    m, n = f.shape
    if r == 0:
        return np.zeros((m, n))
    return (f.u[:, :r] * f.s[:r]) @ f.v[:, :r].T


def soft_threshold(a, tau):
    if tau < 0:
        raise ConfigError(f"threshold must be non-negative, got {tau}")
    a = np.asarray(a, dtype=np.float64)
    return np.sign(a) * np.maximum(np.abs(a) - tau, 0.0)


def svt(a, tau):
    f = a if isinstance(a, SvdFactors) else svd(a)
    shrunk = soft_threshold(f.s, tau)
    keep = int(np.count_nonzero(shrunk))
    return (f.u[:, :keep] * shrunk[:keep]) @ f.v[:, :keep].T


def numerical_rank(a, rtol=1e-8):
    s = a.s if isinstance(a, SvdFactors) else svd(a).s
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def gaussian_window(side, sigma):
    if side < 1 or side % 2 == 0:
        raise ConfigError(f"window side must be a positive odd number, got {side}")
    if sigma <= 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    half = side // 2
    y, x = np.mgrid[-half : half + 1, -half : half + 1]
    window = np.exp(-(x * x + y * y) / (2.0 * sigma * sigma))
    return window / window.sum()
