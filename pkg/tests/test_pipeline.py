import math

import numpy as np
import pytest

from wlrbg import metrics, numerics, pipeline, seeds, synth
from wlrbg.errors import ConfigError, DataError
from wlrbg.frames import Dataset


@pytest.fixture(scope="module")
def spec():
    return synth.SynthSpec()


@pytest.fixture(scope="module")
def dataset(spec):
    return synth.generate(spec)


@pytest.fixture(scope="module")
def solved(dataset):
    return pipeline.run_pipeline(dataset, pipeline.PipelineConfig(seed=0))


@pytest.fixture
def small_spec():
    return synth.SynthSpec(
        height=32,
        width=40,
        n_frames=40,
        sprite_size=8,
        empty_ranges=((2, 5), (20, 25)),
        static_range=(35, 40),
    )


def empty_frames(spec):
    return [j for j in range(spec.n_frames) if spec.is_empty(j + 1)]


def test_run_pipeline_should_select_mostly_empty_frames(spec, solved):
    _, selection, _ = solved
    empty = set(empty_frames(spec))
    assert len(empty & set(selection.s)) >= 0.8 * len(empty)


def test_selected_frames_should_carry_less_true_foreground(dataset, solved):
    _, selection, _ = solved
    counts = np.count_nonzero(dataset.ground_truth, axis=0)
    assert counts[list(selection.s)].mean() < counts.mean()


def test_run_pipeline_should_score_well_on_default_scenario(dataset, solved):
    decomposition, _, _ = solved
    image = metrics.foreground_image(decomposition.best_foreground)
    points, area = metrics.roc_sweep(image, dataset.ground_truth)
    assert area >= 0.9
    tpr = [p.tpr for p in points]
    fpr = [p.fpr for p in points]
    assert tpr == sorted(tpr, reverse=True)
    assert fpr == sorted(fpr, reverse=True)


def test_run_pipeline_should_clear_empty_frames(spec, dataset, solved):
    decomposition, _, _ = solved
    image = metrics.foreground_image(decomposition.best_foreground)
    for j in empty_frames(spec):
        assert metrics.mse(image[:, j], dataset.ground_truth[:, j]) == 0
        assert math.isinf(metrics.psnr(image[:, j], dataset.ground_truth[:, j]))


def test_run_pipeline_background_rank_should_not_exceed_r(solved):
    decomposition, selection, _ = solved
    assert selection.k <= selection.r
    assert decomposition.background_rank() <= selection.r
    assert decomposition.metadata["r"] == selection.r
    assert decomposition.metadata["k"] == selection.k


def test_run_pipeline_should_keep_original_frame_order(dataset, solved):
    decomposition, selection, _ = solved
    np.testing.assert_array_equal(
        selection.permutation[selection.inverse], np.arange(dataset.n_frames)
    )
    np.testing.assert_allclose(
        decomposition.background + decomposition.foreground, dataset.frames
    )


def test_run_pipeline_should_detect_foreground(dataset, solved):
    decomposition, _, _ = solved
    _, area = metrics.roc_sweep(decomposition.best_foreground, dataset.ground_truth)
    assert area > 0.9


def test_run_pipeline_should_record_one_svd_and_thresholded_foreground(solved):
    decomposition, selection, _ = solved
    assert decomposition.method == "wlr-pipeline"
    assert decomposition.svd_count == 1
    thresholded = decomposition.foreground_thresholded
    assert np.all(np.abs(thresholded[thresholded != 0]) > selection.eps1)


def test_run_pipeline_should_be_reproducible_for_a_seed(small_spec):
    dataset = synth.generate(small_spec)
    config = pipeline.PipelineConfig(seed=4)
    first, first_selection, _ = pipeline.run_pipeline(dataset, config)
    second, second_selection, _ = pipeline.run_pipeline(dataset, config)
    np.testing.assert_array_equal(first.background, second.background)
    np.testing.assert_array_equal(
        first_selection.permutation, second_selection.permutation
    )


def test_run_pipeline_should_commute_with_frame_relabelling(small_spec):
    dataset = synth.generate(small_spec)
    order = np.random.default_rng(9).permutation(dataset.n_frames)
    shuffled = Dataset(
        height=dataset.height,
        width=dataset.width,
        frames=dataset.frames[:, order],
        ground_truth=dataset.ground_truth[:, order],
        names=tuple(dataset.names[j] for j in order),
    )
    expected = pipeline.run_pipeline(dataset)[0].background[:, order]
    actual = pipeline.run_pipeline(shuffled)[0].background
    np.testing.assert_allclose(actual, expected, atol=1e-6)


def test_run_pipeline_on_identical_frames_should_find_no_foreground():
    frame = np.random.default_rng(1).integers(1, 255, 30).astype(np.float64)
    dataset = Dataset(height=6, width=5, frames=np.tile(frame[:, None], (1, 10)))
    decomposition, selection, _ = pipeline.run_pipeline(dataset)
    assert selection.s == tuple(range(10))
    assert selection.eps1 == 0.0
    assert np.abs(decomposition.foreground).max() < 1e-6 * 255


def test_run_pipeline_should_reject_invalid_config(dataset):
    with pytest.raises(ConfigError):
        pipeline.run_pipeline(dataset, pipeline.PipelineConfig(i1=0))


@pytest.mark.parametrize(
    "overrides",
    [
        {"i1": 0},
        {"i2": -1},
        {"w1_low": 0.0},
        {"w1_low": 10.0, "w1_high": 5.0},
        {"eps1_strategy": "median"},
    ],
)
def test_pipeline_config_should_reject_invalid_values(overrides):
    with pytest.raises(ConfigError):
        pipeline.PipelineConfig(**overrides).validate()


def test_initial_decompose_should_treat_rank_one_data_as_background():
    a = np.outer(np.arange(1.0, 7.0), np.ones(4))
    b_in, f_in = pipeline.initial_decompose(a)
    np.testing.assert_array_equal(b_in, a)
    assert np.all(f_in == 0)


def test_initial_decompose_should_shrink_by_second_singular_value():
    a = np.diag([5.0, 2.0, 1.0])
    b_in, f_in = pipeline.initial_decompose(a)
    np.testing.assert_allclose(b_in, np.diag([3.0, 0.0, 0.0]), atol=1e-12)
    np.testing.assert_allclose(b_in + f_in, a)


def test_initial_decompose_should_honour_explicit_threshold():
    a = np.diag([5.0, 2.0, 1.0])
    b_in, _ = pipeline.initial_decompose(a, tau=0.5)
    np.testing.assert_allclose(b_in, np.diag([4.5, 1.5, 0.5]), atol=1e-12)


def test_otsu_threshold_should_split_two_clusters():
    values = np.concatenate([np.zeros(50), np.full(50, 10.0)])
    assert 0.0 < pipeline.otsu_threshold(values) < 10.0


def test_otsu_threshold_should_land_between_noisy_clusters():
    rng = np.random.default_rng(0)
    values = np.concatenate([rng.normal(5, 1, 500), rng.normal(60, 3, 100)])
    assert 10.0 < pipeline.otsu_threshold(values) < 50.0


def test_otsu_threshold_of_constant_values_should_be_zero():
    assert pipeline.otsu_threshold(np.full(10, 3.0)) == 0.0


def test_otsu_threshold_should_separate_dominant_small_residuals():
    values = np.concatenate([np.full(950, 0.01), np.full(50, 0.9)])
    assert 0.01 < pipeline.otsu_threshold(values) < 0.9


def test_initial_decompose_should_factor_the_matrix_once(monkeypatch):
    calls = []
    factor = numerics.svd

    def counting_svd(a):
        calls.append(np.shape(a))
        return factor(a)

    monkeypatch.setattr(numerics, "svd", counting_svd)
    pipeline.initial_decompose(np.diag([5.0, 2.0, 1.0]))
    assert calls == [(3, 3)]


def test_select_eps1_should_support_percentile_strategy():
    values = np.arange(101.0)
    assert pipeline.select_eps1(values, "percentile") == pytest.approx(95.0)


def test_select_eps1_should_reject_unknown_strategy():
    with pytest.raises(ConfigError):
        pipeline.select_eps1(np.arange(5.0), "median")


def test_select_eps1_should_reject_empty_residual():
    with pytest.raises(DataError):
        pipeline.select_eps1(np.zeros((3, 0)))


def test_binarize_should_mark_large_foreground_and_nonzero_background():
    f_in = np.array([[0.5, -3.0], [2.0, 0.0]])
    b_in = np.array([[1.0, 0.0], [0.0, -2.0]])
    lf, lb = pipeline.binarize(f_in, b_in, 1.0)
    np.testing.assert_array_equal(lf, [[False, True], [True, False]])
    np.testing.assert_array_equal(lb, [[True, False], [False, True]])


def test_binarize_should_reject_negative_threshold():
    with pytest.raises(ConfigError):
        pipeline.binarize(np.zeros((2, 2)), np.zeros((2, 2)), -1.0)


def test_percentage_scores_should_divide_column_counts():
    lf = np.array([[True, False, True], [True, False, False]])
    lb = np.array([[True, False, False], [True, True, False]])
    scores = pipeline.percentage_scores(lf, lb)
    np.testing.assert_array_equal(scores, [100.0, 0.0, np.inf])


def test_select_frames_should_pick_frames_at_or_below_mode():
    s, eps2, fell_back = pipeline.select_frames([1.0, 1.2, 2.0, 5.0])
    assert (s, eps2, fell_back) == ((0, 1), 1.0, False)


def test_select_frames_should_break_ties_toward_smaller_level():
    s, eps2, _ = pipeline.select_frames([1.0, 2.0, 7.0])
    assert (s, eps2) == ((0,), 1.0)


def test_select_frames_should_fall_back_when_mode_is_top_level():
    s, eps2, fell_back = pipeline.select_frames([0.0, 50.0, 50.0, 50.0])
    assert (s, eps2, fell_back) == ((0,), 0.0, True)


def test_select_frames_should_keep_all_frames_with_equal_scores():
    s, eps2, fell_back = pipeline.select_frames([4.0, 4.0, 4.0])
    assert (s, eps2, fell_back) == ((0, 1, 2), 4.0, False)


def test_select_frames_should_never_pick_frames_without_background():
    s, _, _ = pipeline.select_frames([np.inf, 3.0, 3.0])
    assert s == (1, 2)


def test_select_frames_should_refuse_all_infinite_scores():
    with pytest.raises(DataError):
        pipeline.select_frames([np.inf, np.inf])


def test_block_sizes_should_follow_selection_size():
    assert pipeline.block_sizes(15, 5120, 120, 2, 1) == (8, 9)
    assert pipeline.block_sizes(10, 3, 20, 1, 1) == (3, 3)
    assert pipeline.block_sizes(1, 100, 100, 2, 0) == (1, 1)


def test_arrange_columns_should_put_chosen_frames_first():
    names = [f"f{j}" for j in range(8)]
    rng = seeds.get_rng(0)
    permutation, inverse = pipeline.arrange_columns((1, 4, 6), 2, names, rng)
    assert set(permutation[:2]) <= {1, 4, 6}
    assert sorted(permutation) == list(range(8))
    np.testing.assert_array_equal(permutation[inverse], np.arange(8))
    rest = list(permutation[2:])
    assert rest == sorted(rest, key=names.__getitem__)


def test_arrange_columns_should_be_reproducible_for_a_seed():
    names = [f"f{j}" for j in range(8)]
    first = pipeline.arrange_columns((1, 4, 6), 2, names, seeds.get_rng(3))[0]
    second = pipeline.arrange_columns((1, 4, 6), 2, names, seeds.get_rng(3))[0]
    np.testing.assert_array_equal(first, second)


def test_threshold_foreground_should_zero_small_entries():
    result = pipeline.threshold_foreground(np.array([[0.5, -2.0], [1.0, 3.0]]), 1.0)
    np.testing.assert_array_equal(result, [[0.0, -2.0], [0.0, 3.0]])


def test_frame_selection_record_should_replace_infinite_scores():
    selection = pipeline.FrameSelection(
        s=(0,),
        eps1=1.0,
        eps2=0.0,
        scores=np.array([0.0, np.inf]),
        k=1,
        r=2,
        permutation=np.array([0, 1]),
        inverse=np.array([0, 1]),
    )
    record = selection.to_record()
    assert record["scores"] == [0.0, None]
    assert record["permutation"] == [0, 1]


def test_select_eps1_should_fall_between_magnitude_groups():
    f_in = np.array([[0.0, -1.0], [9.0, 10.0]])
    assert 1.0 <= pipeline.select_eps1(f_in) <= 9.0
