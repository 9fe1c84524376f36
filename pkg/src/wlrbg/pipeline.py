"""Self-supervised background estimation on top of the WLR solver.

A crude SVT split scores every frame by how much foreground it seems to
carry; the least-busy frames form the set S, a random subset of S becomes
the heavily weighted first block, and the WLR solution is mapped back to
the original frame order.
"""
import logging
import math
from dataclasses import dataclass

import cv2
import numpy as np

from . import numerics, seeds, wlr
from .errors import ConfigError, DataError

EPS1_STRATEGIES = ("otsu", "percentile")
NONZERO = 1e-12
RANK_ONE_RTOL = 1e-12


@dataclass(frozen=True)
class PipelineConfig:
    i1: int = 2
    i2: int = 1
    epsilon: float = 1e-7
    wlr_max_iter: int = 50
    w1_low: float = 500.0
    w1_high: float = 1000.0
    eps1_strategy: str = "otsu"
    seed: object = 0

    def validate(self):
        if self.i1 < 1:
            raise ConfigError(f"i1 must be at least 1, got {self.i1}")
        if self.i2 < 0:
            raise ConfigError(f"i2 must be non-negative, got {self.i2}")
        if not 0 < self.w1_low <= self.w1_high:
            raise ConfigError(
                f"need 0 < w1_low <= w1_high, got [{self.w1_low}, {self.w1_high}]"
            )
        if self.eps1_strategy not in EPS1_STRATEGIES:
            raise ConfigError(
                f"Unrecognized eps1 strategy `{self.eps1_strategy}`; "
                f"expected one of {', '.join(EPS1_STRATEGIES)}"
            )


@dataclass
class FrameSelection:
    s: tuple
    eps1: float
    eps2: float
    scores: np.ndarray
    k: int
    r: int
    permutation: np.ndarray
    inverse: np.ndarray
    mode_fallback: bool = False

    def to_record(self):
        return {
            "s": [int(i) for i in self.s],
            "eps1": float(self.eps1),
            "eps2": float(self.eps2),
            "scores": [float(x) if math.isfinite(x) else None for x in self.scores],
            "k": self.k,
            "r": self.r,
            "permutation": [int(i) for i in self.permutation],
            "mode_fallback": self.mode_fallback,
        }


def initial_decompose(a, tau=None):
    """Crude split A = B_in + F_in by singular value thresholding.

    By default tau is the second singular value, so B_in is the shrunk
    leading component. Numerically rank-one data is all background.
    """
    a = numerics.as_matrix(a, "A")
    if tau is not None:
        b_in = numerics.svt(a, tau)
        return b_in, a - b_in
    factors = numerics.svd(a)
    s = factors.s
    if s.size == 0 or s[0] == 0:
        return np.zeros_like(a), np.zeros_like(a)
    second = s[1] if s.size > 1 else 0.0
    if second <= RANK_ONE_RTOL * s[0]:
        return a.copy(), np.zeros_like(a)
    b_in = numerics.svt(factors, second)
    return b_in, a - b_in


def otsu_threshold(values):
    """Otsu's two-class split of |values| on an 8-bit scale.

    Magnitudes are quantized to 0..255 against their maximum; the returned
    threshold sits halfway between the last level of the lower class and the
    first level above it, mapped back to the original scale.
    """
    values = np.abs(np.ravel(values))
    top = float(values.max())
    if top == float(values.min()):
        return 0.0
    levels = np.rint(values * (255.0 / top)).astype(np.uint8).reshape(1, -1)
    level, _ = cv2.threshold(levels, 0, 255, cv2.THRESH_BINARY + cv2.THRESH_OTSU)
    return float((level + 0.5) * top / 255.0)


def select_eps1(f_in, strategy="otsu", percentile=95.0):
    magnitudes = np.abs(np.asarray(f_in, dtype=np.float64))
    if magnitudes.size == 0:
        raise DataError("cannot pick a threshold for an empty residual")
    if magnitudes.max() == magnitudes.min():
        return 0.0
    if strategy == "otsu":
        eps1 = otsu_threshold(magnitudes)
    elif strategy == "percentile":
        eps1 = float(np.percentile(magnitudes, percentile))
    else:
        raise ConfigError(f"Unrecognized eps1 strategy `{strategy}`")
    logging.debug(f"eps1 ({strategy}) = {eps1:.6g}")
    return eps1


def binarize(f_in, b_in, eps1):
    if eps1 < 0:
        raise ConfigError(f"eps1 must be non-negative, got {eps1}")
    lf = np.abs(f_in) > eps1
    lb = np.abs(b_in) > NONZERO
    return lf, lb


def percentage_scores(lf, lb):
    on_f = lf.sum(axis=0).astype(np.float64)
    on_b = lb.sum(axis=0).astype(np.float64)
    scores = np.full(on_f.shape, np.inf)
    usable = on_b > 0
    scores[usable] = 100.0 * on_f[usable] / on_b[usable]
    return scores


def select_frames(scores):
    """Return (S, eps2, fell_back).

    eps2 is the mode of the scores rounded to whole percents, ties going to
    the smaller value. If that mode is the highest score level while the
    scores differ, every frame would be selected; eps2 then drops to the
    lowest level.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise DataError("no frames to select from")
    finite = np.isfinite(scores)
    if not finite.any():
        raise DataError("no frame has background evidence; every score is infinite")
    rounded = np.where(finite, np.round(scores), np.inf)
    levels, counts = np.unique(rounded[finite], return_counts=True)
    eps2 = float(levels[np.argmax(counts)])
    fell_back = False
    if eps2 == levels[-1] and levels.size > 1:
        eps2, fell_back = float(levels[0]), True
        logging.info(f"score mode is the top level; falling back to eps2={eps2}")
    s = tuple(int(i) for i in np.flatnonzero(rounded <= eps2))
    return s, eps2, fell_back


def block_sizes(n_selected, m, n, i1, i2):
    k = min(math.ceil(n_selected / i1), m, n)
    r = min(k + i2, m, n)
    return k, r


def arrange_columns(s, k, names, rng):
    """Permutation putting k random frames of S first, the rest after.

    Both blocks are ordered by frame name before any randomness is drawn,
    so relabelling the input frames only relabels the output.
    """
    by_name = sorted(s, key=lambda j: names[j])
    picked = rng.choice(len(by_name), size=k, replace=False)
    first = [by_name[i] for i in sorted(picked)]
    chosen = set(first)
    rest = sorted(
        (j for j in range(len(names)) if j not in chosen), key=names.__getitem__
    )
    permutation = np.array(first + rest, dtype=np.intp)
    inverse = np.empty_like(permutation)
    inverse[permutation] = np.arange(permutation.size)
    return permutation, inverse


def threshold_foreground(foreground, eps1):
    cleaned = foreground.copy()
    cleaned[np.abs(cleaned) <= eps1] = 0.0
    return cleaned


def run_pipeline(dataset, config=None):
    config = config or PipelineConfig()
    config.validate()
    a = numerics.as_matrix(dataset.frames, "frames")
    m, n = a.shape
    if n == 0:
        raise DataError("dataset has no frames")
    names = list(dataset.names)

    b_in, f_in = initial_decompose(a)
    eps1 = select_eps1(f_in, config.eps1_strategy)
    lf, lb = binarize(f_in, b_in, eps1)
    scores = percentage_scores(lf, lb)
    s, eps2, fell_back = select_frames(scores)
    k, r = block_sizes(len(s), m, n, config.i1, config.i2)
    logging.info(f"eps1={eps1:.4g} eps2={eps2:.4g} |S|={len(s)} k={k} r={r}")

    rng = seeds.get_rng(seeds.derive_seed(config.seed, "selection"))
    permutation, inverse = arrange_columns(s, k, names, rng)
    rearranged = a[:, permutation]
    w1 = rng.uniform(config.w1_low, config.w1_high, size=(m, k))

    wlr_config = wlr.WlrConfig(
        r=r,
        k=k,
        epsilon=config.epsilon,
        max_iter=config.wlr_max_iter,
        seed=seeds.derive_seed(config.seed, "wlr"),
    )
    state, solved = wlr.solve_wlr(rearranged[:, :k], rearranged[:, k:], w1, wlr_config)
    background = solved.background[:, inverse]
    decomposition = solved.from_background(
        a,
        background,
        "wlr-pipeline",
        metadata={"r": r, "k": k, "eps1": eps1, "eps2": eps2},
        svd_count=1,
    )
    decomposition.foreground_thresholded = threshold_foreground(
        decomposition.foreground, eps1
    )
    selection = FrameSelection(
        s=s,
        eps1=eps1,
        eps2=eps2,
        scores=scores,
        k=k,
        r=r,
        permutation=permutation,
        inverse=inverse,
        mode_fallback=fell_back,
    )
    return decomposition, selection, state
