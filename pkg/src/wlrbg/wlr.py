"""Weighted low-rank approximation with weights of the form W = (W1, 1).

The rank constraint is built into the parametrisation

    X = (X1, X1 @ C + B @ D),   X1: m x k, B: m x (r - k),

and the objective

    F(X1, C, B, D) = ||(A1 - X1) * W1||_F^2 + ||A2 - X1 @ C - B @ D||_F^2

is minimised by exact block updates in the order X1, C, B, D. The two
closed-form special cases (penalised first block via one SVD, and the
hard-constrained first block) live here as references.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import numerics, seeds
from .decompositions import Decomposition
from .errors import ConfigError, InfeasibleProblemError, SolverError

ZERO_NORM = 1e-12
# singular values below this fraction of the largest count as zero in the
# least-squares block updates
LSTSQ_RTOL = 1e-5


@dataclass(frozen=True)
class WlrConfig:
    r: int
    k: int
    epsilon: float = 1e-7
    max_iter: int = 50
    seed: object = None
    record_substeps: bool = False
    rtol: float = LSTSQ_RTOL

    def validate(self, m, n):
        if not 0 < self.k <= n:
            raise ConfigError(f"k must satisfy 0 < k <= n={n}, got k={self.k}")
        if not self.k <= self.r <= min(m, n):
            raise ConfigError(
                f"r must satisfy k={self.k} <= r <= min(m, n)={min(m, n)}, "
                f"got r={self.r}"
            )
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0 <= self.rtol < 1:
            raise ConfigError(f"rtol must lie in [0, 1), got {self.rtol}")


@dataclass
class WlrState:
    x1: np.ndarray
    c: np.ndarray
    b: np.ndarray
    d: np.ndarray
    iteration: int = 0
    objective_history: list = field(default_factory=list)
    error_history: list = field(default_factory=list)
    relative_error_history: list = field(default_factory=list)
    substep_history: list = field(default_factory=list)
    rank_deficient: set = field(default_factory=set)
    converged: bool = False
    stop_reason: str = ""

    @property
    def k(self):
        return self.x1.shape[1]

    @property
    def r(self):
        return self.k + self.b.shape[1]

    def low_rank_part(self):
        """B @ D, or zeros when r == k."""
        m, n_rest = self.x1.shape[0], self.c.shape[1]
        if self.b.shape[1] == 0:
            return np.zeros((m, n_rest))
        return self.b @ self.d

    def x2(self):
        return self.x1 @ self.c + self.low_rank_part()

    def compose(self):
        return np.hstack([self.x1, self.x2()])

    def to_record(self):
        return {
            "iterations": self.iteration,
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "objective_history": list(self.objective_history),
            "error_history": list(self.error_history),
            "relative_error_history": list(self.relative_error_history),
            "rank_deficient": sorted(self.rank_deficient),
        }


def check_shapes(a1, a2, state=None, w1=None):
    if a1.shape[0] != a2.shape[0]:
        raise ConfigError(
            f"A1 and A2 must have the same row count, got {a1.shape} and {a2.shape}"
        )
    m, k = a1.shape
    if w1 is not None and w1.shape != (m, k):
        raise ConfigError(f"W1 must have shape {(m, k)}, got {w1.shape}")
    if state is not None:
        n_rest = a2.shape[1]
        r_extra = state.b.shape[1]
        expected = {
            "x1": (m, k),
            "c": (k, n_rest),
            "b": (m, r_extra),
            "d": (r_extra, n_rest),
        }
        for name, shape in expected.items():
            actual = getattr(state, name).shape
            if actual != shape:
                raise ConfigError(f"{name} must have shape {shape}, got {actual}")


def objective(a1, a2, state, w1):
    check_shapes(a1, a2, state, w1)
    first = np.sum(((a1 - state.x1) * w1) ** 2)
    second = np.sum((a2 - state.x2()) ** 2)
    return float(first + second)


def _lstsq(a, b, block, state, rtol):
    """Minimum-norm least squares, ignoring directions below `rtol`."""
    try:
        x, _, rank, _ = scipy.linalg.lstsq(
            a, b, cond=rtol, lapack_driver="gelsd", check_finite=False
        )
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"least-squares update of {block} failed: {exc}")
    if rank < a.shape[1]:
        logging.debug(f"{block} update is rank deficient ({rank} < {a.shape[1]})")
        state.rank_deficient.add(block)
    return x


def update_x1(state, a1, a2, w1):
    """Row-wise solve of X1(i,:) (diag(W1(i,:)^2) + C C^T) = E(i,:).

    All m systems are solved as one batched LAPACK call.
    """
    if np.any(w1 <= 0):
        raise ConfigError("W1 must be strictly positive")
    m, k = a1.shape
    w_sq = w1 * w1
    e = a1 * w_sq + (a2 - state.low_rank_part()) @ state.c.T
    systems = np.broadcast_to(state.c @ state.c.T, (m, k, k)).copy()
    diagonal = np.arange(k)
    systems[:, diagonal, diagonal] += w_sq
    try:
        return np.linalg.solve(systems, e[:, :, np.newaxis])[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular row system in X1 update: {exc}")


def update_c(state, a2, rtol=LSTSQ_RTOL):
    return _lstsq(state.x1, a2 - state.low_rank_part(), "c", state, rtol)


def update_b(state, a2, rtol=LSTSQ_RTOL):
    if state.b.shape[1] == 0:
        return state.b
    residual = a2 - state.x1 @ state.c
    return _lstsq(state.d.T, residual.T, "b", state, rtol).T


def update_d(state, a2, rtol=LSTSQ_RTOL):
    if state.b.shape[1] == 0:
        return state.d
    residual = a2 - state.x1 @ state.c
    return _lstsq(state.b, residual, "d", state, rtol)


def initial_state(m, n, config, rng):
    k, r = config.k, config.r
    return WlrState(
        x1=rng.standard_normal((m, k)),
        c=np.zeros((k, n - k)),
        b=np.zeros((m, r - k)),
        d=rng.standard_normal((r - k, n - k)),
    )


def sweep(state, a1, a2, w1, record_substeps=False, rtol=LSTSQ_RTOL):
    """One pass of the four block updates, in place."""
    substeps = []

    def step(block, value):
        setattr(state, block, value)
        if record_substeps:
            substeps.append(objective(a1, a2, state, w1))

    step("x1", update_x1(state, a1, a2, w1))
    step("c", update_c(state, a2, rtol))
    step("b", update_b(state, a2, rtol))
    step("d", update_d(state, a2, rtol))
    if record_substeps:
        state.substep_history.append(substeps)
    return state


def solve_wlr(a1, a2, w1, config):
    a1 = numerics.as_matrix(a1, "A1")
    a2 = numerics.as_matrix(a2, "A2")
    w1 = numerics.as_matrix(w1, "W1")
    check_shapes(a1, a2, w1=w1)
    m, k = a1.shape
    n = k + a2.shape[1]
    config.validate(m, n)
    if np.any(w1 <= 0):
        raise ConfigError("W1 must be strictly positive")
    a = np.hstack([a1, a2])

    if n == k:
        state = WlrState(
            x1=a1.copy(),
            c=np.zeros((k, 0)),
            b=np.zeros((m, config.r - k)),
            d=np.zeros((config.r - k, 0)),
            converged=True,
            stop_reason="no second block",
        )
        state.objective_history.append(0.0)
        return state, Decomposition.from_background(a, a1.copy(), "wlr")

    rng = seeds.get_rng(config.seed)
    state = initial_state(m, n, config, rng)
    state.objective_history.append(objective(a1, a2, state, w1))
    previous = state.compose()

    for p in range(1, config.max_iter + 1):
        state = sweep(
            state, a1, a2, w1, record_substeps=config.record_substeps, rtol=config.rtol
        )
        state.iteration = p
        current = state.compose()
        state.objective_history.append(objective(a1, a2, state, w1))

        error = numerics.frobenius(current - previous)
        previous_norm = numerics.frobenius(previous)
        state.error_history.append(error)
        relative = error / previous_norm if previous_norm >= ZERO_NORM else None
        state.relative_error_history.append(relative)
        logging.debug(
            f"WLR sweep {p}: objective={state.objective_history[-1]:.6g} "
            f"error={error:.3g}"
        )
        previous = current

        if error < config.epsilon:
            state.converged, state.stop_reason = True, "absolute error"
            break
        if relative is not None and relative < config.epsilon:
            state.converged, state.stop_reason = True, "relative error"
            break
    else:
        state.stop_reason = "max iterations"

    logging.info(
        f"WLR finished after {state.iteration} sweeps ({state.stop_reason}), "
        f"objective {state.objective_history[-1]:.6g}"
    )
    decomposition = Decomposition.from_background(
        a, previous, "wlr", metadata={"r": config.r, "k": config.k}
    )
    return state, decomposition


def gtls_objective(a1, a2, x, lam):
    k = a1.shape[1]
    return float(
        lam**2 * np.sum((a1 - x[:, :k]) ** 2) + np.sum((a2 - x[:, k:]) ** 2)
    )


def solve_gtls(a1, a2, lam, r):
    """Closed form of min lam^2 ||A1 - X1||^2 + ||A2 - X2||^2, rank(X) <= r."""
    a1 = numerics.as_matrix(a1, "A1")
    a2 = numerics.as_matrix(a2, "A2")
    check_shapes(a1, a2)
    if lam <= 0:
        raise ConfigError(f"lambda must be positive, got {lam}")
    m, k = a1.shape
    n = k + a2.shape[1]
    if not 0 <= r <= min(m, n):
        raise ConfigError(f"r must satisfy 0 <= r <= {min(m, n)}, got {r}")
    scaled = np.hstack([lam * a1, a2])
    x = numerics.truncate_rank(numerics.svd(scaled), r)
    x[:, :k] /= lam
    return x


def golub_objective(a1, a2, x):
    return float(np.sum((np.hstack([a1, a2]) - x) ** 2))


def golub_solve(a1, a2, r, rtol=1e-10):
    """Best rank-r approximation of (A1, A2) that keeps A1 exactly."""
    a1 = numerics.as_matrix(a1, "A1")
    a2 = numerics.as_matrix(a2, "A2")
    check_shapes(a1, a2)
    f1 = numerics.svd(a1)
    rank_a1 = numerics.numerical_rank(f1, rtol=rtol)
    if r < rank_a1:
        raise InfeasibleProblemError(
            f"r={r} is smaller than rank(A1)={rank_a1}; no rank-r matrix keeps A1"
        )
    basis = f1.u[:, :rank_a1]
    projected = basis @ (basis.T @ a2)
    complement = numerics.truncate_rank(numerics.svd(a2 - projected), r - rank_a1)
    return np.hstack([a1, projected + complement])
