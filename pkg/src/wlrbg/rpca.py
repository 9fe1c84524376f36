"""Robust PCA baselines: min ||A - B||_1 + lambda ||B||_* style splits.

Both solvers return a Decomposition whose background is the low-rank part
and whose foreground is the sparse part.
"""
import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import numerics
from .decompositions import Decomposition
from .errors import ConfigError

DEBIAS_SWEEPS = 100
# relative singular value cutoff for the rank kept by the refit
DEBIAS_RTOL = 1e-4
DEBIAS_TOL = 1e-13


@dataclass(frozen=True)
class RpcaConfig:
    lam: float = None
    mu: float = 1.5
    rho: float = 1.25
    tol: float = 1e-7
    max_iter: int = 500
    eta: float = 0.9
    mu_floor: float = 1e-6
    debias_sweeps: int = DEBIAS_SWEEPS

    def resolve(self, m, n):
        """Fill in the data-dependent sparsity weight 1/sqrt(max(m, n))."""
        lam = self.lam if self.lam is not None else 1.0 / math.sqrt(max(m, n))
        config = RpcaConfig(**{**asdict(self), "lam": lam})
        config.validate()
        return config

    def validate(self):
        if self.lam is not None and self.lam <= 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.mu <= 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if self.rho <= 1:
            raise ConfigError(f"rho must exceed 1, got {self.rho}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0 < self.eta < 1:
            raise ConfigError(f"eta must lie in (0, 1), got {self.eta}")
        if self.mu_floor <= 0:
            raise ConfigError(f"mu_floor must be positive, got {self.mu_floor}")
        if self.debias_sweeps < 0:
            raise ConfigError(
                f"debias_sweeps must be non-negative, got {self.debias_sweeps}"
            )


def _zero_decomposition(a, method, config):
    zeros = np.zeros_like(a)
    return Decomposition(
        zeros,
        zeros.copy(),
        method,
        metadata={
            "lambda": config.lam,
            "converged": True,
            "iterations": 0,
            "residual_history": [],
        },
    )


def solve_iealm(a, config=None):
    """Inexact augmented Lagrange multiplier RPCA.

    `config.mu` is scale free: the first penalty is mu / ||A||_2 and grows
    by rho every iteration.
    """
    a = numerics.as_matrix(a, "A")
    config = (config or RpcaConfig()).resolve(*a.shape)
    norm_a = numerics.frobenius(a)
    if norm_a == 0:
        return _zero_decomposition(a, "iealm", config)

    spectral = float(numerics.svd(a).s[0])
    lam = config.lam
    mu = config.mu / spectral
    y = a / max(spectral, np.max(np.abs(a)) / lam)
    low_rank = np.zeros_like(a)
    sparse = np.zeros_like(a)
    mu_history, residual_history = [], []
    converged = False

    for iteration in range(1, config.max_iter + 1):
        low_rank = numerics.svt(a - sparse + y / mu, 1.0 / mu)
        sparse = numerics.soft_threshold(a - low_rank + y / mu, lam / mu)
        residual = a - low_rank - sparse
        y = y + mu * residual
        mu_history.append(mu)
        mu = mu * config.rho
        relative = numerics.frobenius(residual) / norm_a
        residual_history.append(relative)
        logging.debug(f"iEALM iteration {iteration}: residual={relative:.3g}")
        if relative < config.tol:
            converged = True
            break

    if not converged:
        logging.warning(f"iEALM stopped at max_iter={config.max_iter}")
    logging.info(f"iEALM finished after {iteration} iterations")
    return Decomposition(
        low_rank,
        sparse,
        "iealm",
        metadata={
            "lambda": lam,
            "mu": config.mu,
            "rho": config.rho,
            "tol": config.tol,
            "max_iter": config.max_iter,
            "initial_penalty": mu_history[0],
            "mu_history": mu_history,
            "residual_history": residual_history,
            "iterations": iteration,
            "converged": converged,
        },
        svd_count=iteration + 1,
    )


def debias(a, low_rank, sparse, max_sweeps=DEBIAS_SWEEPS, rtol=DEBIAS_RTOL):
    """Refit a shrunk split on its own rank and support.

    Alternates B = best rank-r fit of A - F with F = A - B on the support of
    F, which undoes the shrinkage both soft thresholds leave behind. Each
    half-step is a projection, so ||A - B - F||_F never increases. Returns
    (low_rank, sparse, sweeps).
    """
    rank = numerics.numerical_rank(low_rank, rtol=rtol)
    support = sparse != 0
    norm_a = numerics.frobenius(a)
    previous = math.inf
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        low_rank = numerics.truncate_rank(numerics.svd(a - sparse), rank)
        sparse = np.where(support, a - low_rank, 0.0)
        residual = numerics.frobenius(a - low_rank - sparse) / norm_a
        logging.debug(f"debias sweep {sweeps}: residual={residual:.3g}")
        if residual < DEBIAS_TOL or previous - residual <= DEBIAS_TOL:
            break
        previous = residual
    return low_rank, sparse, sweeps


def solve_apg(a, config=None):
    """Accelerated proximal gradient RPCA with continuation on mu.

    Solves mu (||B||_* + lambda ||F||_1) + 1/2 ||A - B - F||_F^2 with mu
    decreasing geometrically by eta down to mu_floor * ||A||_2. Once the
    floor problem is stationary the split is debiased on its rank and
    support, unless `debias_sweeps` is 0.
    """
    a = numerics.as_matrix(a, "A")
    config = (config or RpcaConfig()).resolve(*a.shape)
    norm_a = numerics.frobenius(a)
    if norm_a == 0:
        return _zero_decomposition(a, "apg", config)

    spectral = float(numerics.svd(a).s[0])
    lam = config.lam
    mu = 0.99 * spectral
    mu_bar = config.mu_floor * spectral
    lipschitz = 2.0
    low_rank = low_rank_prev = np.zeros_like(a)
    sparse = sparse_prev = np.zeros_like(a)
    t, t_prev = 1.0, 1.0
    mu_history, residual_history = [], []
    stationary = False

    for iteration in range(1, config.max_iter + 1):
        step_mu = mu
        momentum = (t_prev - 1.0) / t
        y_low = low_rank + momentum * (low_rank - low_rank_prev)
        y_sparse = sparse + momentum * (sparse - sparse_prev)
        gradient = y_low + y_sparse - a

        low_rank_prev, sparse_prev = low_rank, sparse
        low_rank = numerics.svt(y_low - gradient / lipschitz, step_mu / lipschitz)
        sparse = numerics.soft_threshold(
            y_sparse - gradient / lipschitz, lam * step_mu / lipschitz
        )
        t_prev, t = t, (1.0 + math.sqrt(4.0 * t * t + 1.0)) / 2.0
        mu_history.append(step_mu)
        mu = max(config.eta * mu, mu_bar)

        shared = low_rank + sparse - y_low - y_sparse
        stationarity = np.hstack(
            [
                lipschitz * (y_low - low_rank) + shared,
                lipschitz * (y_sparse - sparse) + shared,
            ]
        )
        scale = max(1.0, numerics.frobenius(np.hstack([low_rank, sparse])))
        criterion = numerics.frobenius(stationarity) / (lipschitz * scale)
        residual_history.append(numerics.frobenius(a - low_rank - sparse) / norm_a)
        logging.debug(f"APG iteration {iteration}: stationarity={criterion:.3g}")
        # only a step taken on the floor problem may stop the loop
        if step_mu == mu_bar and criterion < config.tol:
            stationary = True
            break

    sweeps = 0
    if stationary and config.debias_sweeps:
        low_rank, sparse, sweeps = debias(
            a, low_rank, sparse, max_sweeps=config.debias_sweeps
        )
    residual = numerics.frobenius(a - low_rank - sparse) / norm_a
    converged = stationary and residual <= config.tol
    if not stationary:
        logging.warning(f"APG stopped at max_iter={config.max_iter}")
    elif not converged:
        logging.warning(f"APG left a relative residual of {residual:.3g}")
    logging.info(f"APG finished after {iteration} iterations and {sweeps} refits")
    return Decomposition(
        low_rank,
        sparse,
        "apg",
        metadata={
            "lambda": lam,
            "tol": config.tol,
            "max_iter": config.max_iter,
            "eta": config.eta,
            "mu_floor": config.mu_floor,
            "mu_history": mu_history,
            "residual_history": residual_history,
            "iterations": iteration,
            "stationary": stationary,
            "debias_sweeps": sweeps,
            "final_residual": residual,
            "converged": converged,
        },
        svd_count=iteration + 1 + sweeps,
    )
