"""Foreground quality against binary ground-truth masks.

Masks use the 0/255 convention; a pixel is positive when its mask value is
nonzero. Foreground matrices are compared by magnitude.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.integrate
import scipy.ndimage

from . import numerics
from .errors import ConfigError, DataError
from .frames import devectorize

MAX_VALUE = 255.0


class RocPoint(NamedTuple):
    threshold: float
    tp: int
    fp: int
    tn: int
    fn: int
    tpr: float
    fpr: float


def _check_pair(foreground, ground_truth):
    foreground = np.asarray(foreground, dtype=np.float64)
    ground_truth = np.asarray(ground_truth)
    if foreground.shape != ground_truth.shape:
        raise DataError(
            f"foreground shape {foreground.shape} does not match "
            f"ground truth shape {ground_truth.shape}"
        )
    return np.abs(foreground), ground_truth != 0


def _points(scores, truth, thresholds):
    """Confusion counts of `scores > t` for each threshold t."""
    positives = np.sort(scores[truth])
    negatives = np.sort(scores[~truth])
    n_pos, n_neg = positives.size, negatives.size
    if n_pos == 0:
        raise DataError("ground truth has no positive pixels; ROC is undefined")
    tp = n_pos - np.searchsorted(positives, thresholds, side="right")
    fp = n_neg - np.searchsorted(negatives, thresholds, side="right")
    return [
        RocPoint(
            threshold=float(t),
            tp=int(tp_i),
            fp=int(fp_i),
            tn=int(n_neg - fp_i),
            fn=int(n_pos - tp_i),
            tpr=float(tp_i / n_pos),
            fpr=float(fp_i / n_neg) if n_neg else 0.0,
        )
        for t, tp_i, fp_i in zip(thresholds, tp, fp)
    ]


def auc(points):
    """Trapezoidal area under the (fpr, tpr) curve, anchored at (0,0) and (1,1)."""
    fpr = np.array([0.0] + [p.fpr for p in points] + [1.0])
    tpr = np.array([0.0] + [p.tpr for p in points] + [1.0])
    order = np.lexsort((tpr, fpr))
    return float(scipy.integrate.trapezoid(tpr[order], fpr[order]))


def roc_sweep(foreground, ground_truth, n_thresholds=100, max_value=MAX_VALUE):
    if n_thresholds < 2:
        raise ConfigError(f"need at least 2 thresholds, got {n_thresholds}")
    scores, truth = _check_pair(foreground, ground_truth)
    thresholds = np.linspace(0.0, max_value, n_thresholds)
    points = _points(scores.ravel(), truth.ravel(), thresholds)
    return points, auc(points)


def roc_exact(foreground, ground_truth):
    """ROC with a threshold at every distinct magnitude.

    The curve depends only on the ordering of |F|, so its AUC is unchanged
    by any strictly increasing rescaling of the foreground.
    """
    scores, truth = _check_pair(foreground, ground_truth)
    scores = scores.ravel()
    thresholds = np.concatenate([[-np.inf], np.unique(scores)])
    points = _points(scores, truth.ravel(), thresholds)
    return points, auc(points)


def roc_per_frame(foreground, ground_truth, n_thresholds=100, max_value=MAX_VALUE):
    """Per-frame sweeps; frames without positives get (None, nan)."""
    scores, truth = _check_pair(foreground, ground_truth)
    results = []
    for j in range(scores.shape[1]):
        if not truth[:, j].any():
            results.append((None, math.nan))
            continue
        results.append(
            roc_sweep(scores[:, j], truth[:, j], n_thresholds, max_value)
        )
    return results


def mse(f_col, g_col):
    f_col = np.asarray(f_col, dtype=np.float64)
    g_col = np.asarray(g_col, dtype=np.float64)
    if f_col.shape != g_col.shape:
        raise DataError(f"cannot compare shapes {f_col.shape} and {g_col.shape}")
    return float(np.mean((f_col - g_col) ** 2))


def psnr(f_col, g_col, max_value=MAX_VALUE):
    error = mse(f_col, g_col)
    if error == 0:
        return math.inf
    return float(10.0 * np.log10(max_value**2 / error))


def ssim_map(frame_x, frame_y, window=11, sigma=1.5, max_value=MAX_VALUE):
    """Gaussian-windowed SSIM over the valid region only.

    A (h, w) pair gives an (h - window + 1, w - window + 1) map.
    """
    x = np.asarray(frame_x, dtype=np.float64)
    y = np.asarray(frame_y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise DataError(f"need two frames of equal shape, got {x.shape} and {y.shape}")
    if min(x.shape) < window:
        raise DataError(f"frame {x.shape} is smaller than the {window}x{window} window")
    kernel = numerics.gaussian_window(window, sigma)
    half = window // 2
    valid = (slice(half, x.shape[0] - half), slice(half, x.shape[1] - half))

    def local_mean(image):
        return scipy.ndimage.correlate(image, kernel, mode="constant")[valid]

    c1 = (0.01 * max_value) ** 2
    c2 = (0.03 * max_value) ** 2
    mu_x, mu_y = local_mean(x), local_mean(y)
    mu_xx, mu_yy, mu_xy = mu_x * mu_x, mu_y * mu_y, mu_x * mu_y
    sigma_xx = local_mean(x * x) - mu_xx
    sigma_yy = local_mean(y * y) - mu_yy
    sigma_xy = local_mean(x * y) - mu_xy
    return ((2 * mu_xy + c1) * (2 * sigma_xy + c2)) / (
        (mu_xx + mu_yy + c1) * (sigma_xx + sigma_yy + c2)
    )


def mssim(frame_x, frame_y, window=11, sigma=1.5, max_value=MAX_VALUE):
    return float(np.mean(ssim_map(frame_x, frame_y, window, sigma, max_value)))


def tp_fp_counts(foreground, ground_truth, eps1):
    if eps1 < 0:
        raise ConfigError(f"eps1 must be non-negative, got {eps1}")
    scores, truth = _check_pair(foreground, ground_truth)
    predicted = scores > eps1
    tp = np.sum(predicted & truth, axis=0)
    fp = np.sum(predicted & ~truth, axis=0)
    return tp, fp


def foreground_image(foreground):
    """Displayable foreground: magnitudes clamped to the pixel range."""
    return np.clip(np.abs(np.asarray(foreground, dtype=np.float64)), 0, MAX_VALUE)


@dataclass
class MetricsReport:
    roc: list
    auc: float
    per_frame_mse: np.ndarray
    per_frame_psnr: np.ndarray
    per_frame_mssim: np.ndarray
    ssim_maps: list = None
    tp: np.ndarray = None
    fp: np.ndarray = None
    eps1: float = None
    exact_auc: float = None
    extra: dict = field(default_factory=dict)

    @property
    def n_frames(self):
        return len(self.per_frame_mse)

    @property
    def mean_psnr(self):
        finite = self.per_frame_psnr[np.isfinite(self.per_frame_psnr)]
        if finite.size == 0:
            return math.inf
        return float(np.mean(finite))

    @property
    def mean_mssim(self):
        return float(np.mean(self.per_frame_mssim))

    @property
    def infinite_psnr_frames(self):
        return int(np.sum(np.isinf(self.per_frame_psnr)))

    def to_summary(self):
        return {
            "auc": self.auc,
            "exact_auc": self.exact_auc,
            "mean_psnr": self.mean_psnr if math.isfinite(self.mean_psnr) else None,
            "mean_mssim": self.mean_mssim,
            "mean_mse": float(np.mean(self.per_frame_mse)),
            "infinite_psnr_frames": self.infinite_psnr_frames,
            "n_frames": self.n_frames,
            "eps1": self.eps1,
            **self.extra,
        }


def evaluate(dataset, foreground, eps1=None, threads=1, keep_maps=True):
    """Run the whole suite on one foreground matrix."""
    if not dataset.has_ground_truth:
        raise DataError("ground truth required for evaluation")
    if threads < 1:
        raise ConfigError(f"threads must be at least 1, got {threads}")
    image = foreground_image(foreground)
    truth = dataset.ground_truth
    points, area = roc_sweep(image, truth)
    _, exact_area = roc_exact(image, truth)
    h, w = dataset.height, dataset.width

    def per_frame(j):
        f_col, g_col = image[:, j], truth[:, j]
        smap = ssim_map(devectorize(f_col, h, w), devectorize(g_col, h, w))
        return mse(f_col, g_col), psnr(f_col, g_col), float(np.mean(smap)), smap

    with ThreadPoolExecutor(max_workers=threads) as pool:
        rows = list(pool.map(per_frame, range(image.shape[1])))

    report = MetricsReport(
        roc=points,
        auc=area,
        exact_auc=exact_area,
        per_frame_mse=np.array([row[0] for row in rows]),
        per_frame_psnr=np.array([row[1] for row in rows]),
        per_frame_mssim=np.array([row[2] for row in rows]),
        ssim_maps=[row[3] for row in rows] if keep_maps else None,
        eps1=eps1,
    )
    if eps1 is not None:
        report.tp, report.fp = tp_fp_counts(image, truth, eps1)
    return report