import math

import numpy as np
import pytest

from wlrbg import metrics, numerics
from wlrbg.errors import ConfigError, DataError
from wlrbg.frames import Dataset


@pytest.fixture
def rng():
    return np.random.default_rng(12)


@pytest.fixture
def masks(rng):
    return np.where(rng.random((400, 6)) < 0.2, 255.0, 0.0)


def test_roc_sweep_of_perfect_foreground_should_have_unit_area(masks):
    points, area = metrics.roc_sweep(masks, masks)
    assert area == pytest.approx(1.0)
    assert len(points) == 100
    assert points[0].threshold == 0.0
    assert points[-1].threshold == 255.0


def test_roc_sweep_of_random_foreground_should_be_near_chance(rng):
    truth = np.where(rng.random((10000, 1)) < 0.2, 255.0, 0.0)
    scores = rng.uniform(0, 255, truth.shape)
    _, area = metrics.roc_sweep(scores, truth)
    assert area == pytest.approx(0.5, abs=0.03)


def test_roc_sweep_should_match_loop_oracle(rng, masks):
    scores = rng.uniform(-255, 255, masks.shape)
    points, _ = metrics.roc_sweep(scores, masks, n_thresholds=7)
    for point in points:
        tp = fp = tn = fn = 0
        for s, g in zip(scores.ravel(), masks.ravel()):
            predicted = abs(s) > point.threshold
            if g and predicted:
                tp += 1
            elif g:
                fn += 1
            elif predicted:
                fp += 1
            else:
                tn += 1
        assert (point.tp, point.fp, point.tn, point.fn) == (tp, fp, tn, fn)


def test_roc_rates_should_not_increase_with_threshold(rng, masks):
    points, area = metrics.roc_sweep(rng.uniform(0, 255, masks.shape), masks)
    tpr = [p.tpr for p in points]
    fpr = [p.fpr for p in points]
    assert all(b <= a for a, b in zip(tpr, tpr[1:]))
    assert all(b <= a for a, b in zip(fpr, fpr[1:]))
    assert 0.0 <= area <= 1.0


def test_roc_exact_should_ignore_increasing_rescaling(rng, masks):
    scores = rng.uniform(0, 50, masks.shape) + masks / 10
    _, area = metrics.roc_exact(scores, masks)
    _, rescaled = metrics.roc_exact(3 * scores**2 + 1, masks)
    assert rescaled == pytest.approx(area, abs=1e-12)


def test_roc_should_require_positive_pixels():
    with pytest.raises(DataError):
        metrics.roc_sweep(np.ones((4, 2)), np.zeros((4, 2)))


def test_roc_should_reject_mismatched_shapes():
    with pytest.raises(DataError):
        metrics.roc_sweep(np.ones((4, 2)), np.ones((4, 3)))


def test_roc_sweep_should_need_two_thresholds(masks):
    with pytest.raises(ConfigError):
        metrics.roc_sweep(masks, masks, n_thresholds=1)


def test_roc_per_frame_should_skip_frames_without_positives(masks):
    truth = masks.copy()
    truth[:, 2] = 0
    results = metrics.roc_per_frame(masks, truth)
    assert results[2][0] is None
    assert math.isnan(results[2][1])
    assert results[0][1] == pytest.approx(1.0)


def test_auc_should_integrate_anchored_curve():
    point = metrics.RocPoint(1.0, 1, 1, 1, 1, 0.5, 0.5)
    assert metrics.auc([point]) == pytest.approx(0.5)


def test_mse_and_psnr_should_follow_definitions():
    assert metrics.mse(np.zeros(4), np.full(4, 2.0)) == 4.0
    assert metrics.psnr(np.zeros(4), np.full(4, 255.0)) == pytest.approx(0.0)
    assert math.isinf(metrics.psnr(np.ones(4), np.ones(4)))


def test_mse_should_reject_mismatched_shapes():
    with pytest.raises(DataError):
        metrics.mse(np.zeros(4), np.zeros(5))


def test_ssim_map_should_cover_valid_region_only(rng):
    x = rng.uniform(0, 255, (64, 80))
    assert metrics.ssim_map(x, x).shape == (54, 70)


def test_ssim_of_identical_frames_should_be_one(rng):
    x = rng.uniform(0, 255, (20, 24))
    assert metrics.mssim(x, x) == pytest.approx(1.0, abs=1e-12)


def test_ssim_should_be_symmetric(rng):
    x = rng.uniform(0, 255, (20, 24))
    y = rng.uniform(0, 255, (20, 24))
    np.testing.assert_allclose(metrics.ssim_map(x, y), metrics.ssim_map(y, x))


def brute_force_ssim(x, y):
    kernel = numerics.gaussian_window(11, 1.5)
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    smap = np.empty((x.shape[0] - 10, x.shape[1] - 10))
    for i in range(smap.shape[0]):
        for j in range(smap.shape[1]):
            px, py = x[i : i + 11, j : j + 11], y[i : i + 11, j : j + 11]
            mx, my = np.sum(kernel * px), np.sum(kernel * py)
            vx = np.sum(kernel * px * px) - mx * mx
            vy = np.sum(kernel * py * py) - my * my
            cxy = np.sum(kernel * px * py) - mx * my
            expected = ((2 * mx * my + c1) * (2 * cxy + c2)) / (
                (mx * mx + my * my + c1) * (vx + vy + c2)
            )
            smap[i, j] = expected
    return smap


def test_ssim_map_should_match_brute_force_windows(rng):
    for _ in range(5):
        x = rng.uniform(0, 255, (16, 18))
        y = np.clip(x + rng.normal(0, 30, x.shape), 0, 255)
        expected = brute_force_ssim(x, y)
        np.testing.assert_allclose(metrics.ssim_map(x, y), expected, rtol=0, atol=1e-10)
        assert metrics.mssim(x, y) == pytest.approx(expected.mean(), abs=1e-10)


def test_ssim_of_constant_frames_should_compare_means():
    c1 = (0.01 * 255) ** 2
    expected = (2 * 100 * 50 + c1) / (100**2 + 50**2 + c1)
    smap = metrics.ssim_map(np.full((12, 12), 100.0), np.full((12, 12), 50.0))
    np.testing.assert_allclose(smap, expected, rtol=1e-9)


def test_ssim_should_drop_for_an_impulse():
    x = np.full((15, 15), 128.0)
    y = x.copy()
    y[7, 7] = 255.0
    assert metrics.mssim(x, y) < 1.0


def test_ssim_map_should_reject_frames_smaller_than_window():
    with pytest.raises(DataError):
        metrics.ssim_map(np.zeros((10, 20)), np.zeros((10, 20)))


def test_tp_fp_counts_should_count_per_frame():
    foreground = np.array([[5.0, 0.0], [-5.0, 5.0], [0.5, 5.0]])
    truth = np.array([[255, 0], [0, 255], [255, 0]])
    tp, fp = metrics.tp_fp_counts(foreground, truth, 1.0)
    np.testing.assert_array_equal(tp, [1, 1])
    np.testing.assert_array_equal(fp, [1, 1])


def test_tp_fp_counts_should_reject_negative_threshold():
    with pytest.raises(ConfigError):
        metrics.tp_fp_counts(np.zeros((2, 2)), np.zeros((2, 2)), -1.0)


def test_foreground_image_should_clamp_magnitudes():
    image = metrics.foreground_image(np.array([[-300.0, 20.0], [-4.0, 400.0]]))
    np.testing.assert_array_equal(image, [[255.0, 20.0], [4.0, 255.0]])


@pytest.fixture
def dataset():
    truth = np.zeros((16, 16, 3))
    truth[4:10, 4:10, :] = 255.0
    truth = truth.reshape((256, 3), order="F")
    frames = np.full((256, 3), 90.0)
    return Dataset(height=16, width=16, frames=frames, ground_truth=truth)


def test_evaluate_should_score_perfect_foreground(dataset):
    report = metrics.evaluate(dataset, dataset.ground_truth, eps1=10.0, threads=2)
    assert report.auc == pytest.approx(1.0)
    assert report.exact_auc == pytest.approx(1.0)
    assert report.infinite_psnr_frames == 3
    assert math.isinf(report.mean_psnr)
    assert report.mean_mssim == pytest.approx(1.0)
    assert len(report.ssim_maps) == 3
    np.testing.assert_array_equal(report.tp, [36, 36, 36])
    np.testing.assert_array_equal(report.fp, [0, 0, 0])


def test_evaluate_summary_should_hide_infinite_psnr(dataset):
    summary = metrics.evaluate(dataset, dataset.ground_truth).to_summary()
    assert summary["mean_psnr"] is None
    assert summary["n_frames"] == 3
    assert summary["eps1"] is None


def test_evaluate_should_average_finite_psnr_only(dataset):
    foreground = dataset.ground_truth.copy()
    foreground[0, 0] = 255.0
    report = metrics.evaluate(dataset, foreground, keep_maps=False)
    expected = 10 * math.log10(255.0**2 / (255.0**2 / 256))
    assert report.mean_psnr == pytest.approx(expected)
    assert report.infinite_psnr_frames == 2
    assert report.ssim_maps is None
    assert report.tp is None


def test_evaluate_should_require_ground_truth():
    bare = Dataset(height=16, width=16, frames=np.zeros((256, 2)))
    with pytest.raises(DataError):
        metrics.evaluate(bare, bare.frames)
