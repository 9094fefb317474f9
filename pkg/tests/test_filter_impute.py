import numpy as np
import pytest
from scipy.signal import lfilter

from src.exceptions import ImputationError, NonPositivePhi, TransformError
from src.filter_impute import (
    FilterSpec,
    baseline_impute,
    estimate_phi,
    filter_series,
    impute,
)
from src.series_core import Series


@pytest.mark.parametrize("phi, M", [(0.5, 1), (0.3, 12), (0.95, 24)])
def test_normalized_weights_sum_to_one(phi, M):
    assert FilterSpec(phi, M).weights().sum() == pytest.approx(1.0, abs=1e-12)


def test_unnormalized_weights_are_powers():
    assert FilterSpec(0.5, 2, normalized=False).weights().tolist() == [0.5, 0.25, 0.125]


@pytest.mark.parametrize("phi, M", [(0.0, 3), (1.0, 3), (0.5, -1)])
def test_filter_spec_validation(phi, M):
    with pytest.raises(TransformError):
        FilterSpec(phi, M)


def test_filter_hand_example():
    y = filter_series(Series.from_values([2.0, 4.0]), FilterSpec(0.5, 1))
    assert y.values.tolist() == pytest.approx([10.0 / 3.0])
    assert y.origin_offset == 1


def test_filter_constant_series_is_fixed_point():
    y = filter_series(Series.from_values([3.7] * 40), FilterSpec(0.6, 12))
    assert np.allclose(y.values, 3.7, rtol=0, atol=1e-12)
    assert len(y) == 40 - 12


def test_filter_window_zero_is_identity():
    x = np.random.default_rng(0).standard_normal(10)
    y = filter_series(Series.from_values(x), FilterSpec(0.4, 0))
    assert np.array_equal(y.values, x)


def test_filter_is_affine():
    x = np.random.default_rng(1).standard_normal(50)
    spec = FilterSpec(0.7, 5)
    base = filter_series(Series.from_values(x), spec).values
    shifted = filter_series(Series.from_values(2.5 * x - 1.0), spec).values
    assert np.allclose(shifted, 2.5 * base - 1.0, atol=1e-12)


def test_filter_rejects_short_or_incomplete_series():
    with pytest.raises(TransformError):
        filter_series(Series.from_values([1.0, 2.0]), FilterSpec(0.5, 2))
    with pytest.raises(TransformError):
        filter_series(Series.from_values([1.0, None, 3.0]), FilterSpec(0.5, 1))


def test_impute_hand_example():
    result = impute(Series.from_values([1.0, 2.0, None, 4.0]), FilterSpec(0.5, 1))
    assert result.fill_mean == pytest.approx(7.0 / 3.0)
    assert result.filled[2] == pytest.approx(20.0 / 9.0, abs=1e-10)
    assert result.series.is_complete
    assert result.windows[2] == 2


def test_impute_truncated_window_at_start_uses_mean_only():
    result = impute(Series.from_values([None, 2.0, 3.0]), FilterSpec(0.5, 2))
    assert result.filled[0] == pytest.approx(2.5)
    assert result.windows[0] == 1


def test_impute_without_holes_is_identity():
    s = Series.from_values([1.0, 2.0, 3.0])
    result = impute(s, FilterSpec(0.5, 2))
    assert result.filled == {}
    assert np.array_equal(result.series.values, s.values)


def test_impute_consecutive_holes_feed_forward():
    spec = FilterSpec(0.5, 1)
    result = impute(Series.from_values([3.0, None, None, 6.0]), spec)
    mean = 4.5
    first = (2.0 / 3.0) * mean + (1.0 / 3.0) * 3.0
    second = (2.0 / 3.0) * mean + (1.0 / 3.0) * first
    assert result.filled[1] == pytest.approx(first)
    assert result.filled[2] == pytest.approx(second)


def test_impute_never_changes_observed_values():
    rng = np.random.default_rng(9)
    values = rng.uniform(1, 5, size=60)
    values[rng.choice(60, size=8, replace=False)] = np.nan
    s = Series.from_values(values)
    result = impute(s, FilterSpec(0.4, 12))
    assert np.array_equal(result.series.values[s.mask], s.values[s.mask])
    assert sorted(result.filled) == s.holes


def test_impute_hole_amid_mean_values_gives_mean():
    result = impute(Series.from_values([2.0, 2.0, 2.0, None, 2.0]), FilterSpec(0.8, 3))
    assert result.filled[3] == pytest.approx(2.0, abs=1e-12)


def test_impute_is_deterministic():
    s = Series.from_values([1.0, None, 2.0, None, None, 5.0, 4.0])
    a = impute(s, FilterSpec(0.6, 3))
    b = impute(s, FilterSpec(0.6, 3))
    assert a.filled == b.filled


def test_impute_needs_two_observed_values():
    with pytest.raises(ImputationError):
        impute(Series.from_values([None, 1.0, None]), FilterSpec(0.5, 1))


def test_imputation_report_lists_holes():
    report = impute(Series.from_values([1.0, 2.0, None, 4.0]), FilterSpec(0.5, 1)).to_dict()
    assert report['strategy'] == 'filter'
    assert report['spec'] == {'phi': 0.5, 'M': 1, 'normalized': True}
    assert report['holes'][0]['index'] == 2
    assert report['holes'][0]['window_used'] == 2


def test_estimate_phi_hand_value():
    assert estimate_phi(Series.from_values([1.0, 2.0, 3.0, 4.0])) == pytest.approx(0.25)


def test_estimate_phi_rejects_negative_correlation():
    with pytest.raises(NonPositivePhi, match="--phi"):
        estimate_phi(Series.from_values([1.0, -1.0] * 10))


def test_estimate_phi_recovers_ar1():
    x = lfilter([1.0], [1.0, -0.8], np.random.default_rng(11).standard_normal(5000))
    assert estimate_phi(Series.from_values(x)) == pytest.approx(0.8, abs=0.05)


def test_estimate_phi_with_holes_uses_complete_pairs():
    x = lfilter([1.0], [1.0, -0.8], np.random.default_rng(12).standard_normal(3000))
    x[::50] = np.nan
    assert estimate_phi(Series.from_values(x)) == pytest.approx(0.8, abs=0.06)


@pytest.mark.parametrize("values, strategy, index, expected", [
    ([1.0, 3.0, None], 'mean', 2, 2.0),
    ([5.0, None], 'naive', 1, 5.0),
    ([1.0, 2.0, 3.0, None], 'trend', 3, 4.0),
    ([1.0, None, 3.0], 'bounding_average', 1, 2.0),
    ([1.0, None, 3.0], 'bounding', 1, 2.0),
])
def test_baseline_strategies(values, strategy, index, expected):
    result = baseline_impute(Series.from_values(values), strategy)
    assert result.filled[index] == pytest.approx(expected)
    assert result.spec is None


def test_naive_strategy_chains_through_consecutive_holes():
    result = baseline_impute(Series.from_values([4.0, None, None, 1.0]), 'naive')
    assert result.filled == {1: 4.0, 2: 4.0}


@pytest.mark.parametrize("values, strategy", [
    ([None, 1.0, 2.0], 'naive'),
    ([1.0, None, 2.0], 'trend'),
    ([1.0, 2.0, None], 'bounding_average'),
])
def test_baseline_errors_name_the_hole(values, strategy):
    with pytest.raises(ImputationError, match="hole"):
        baseline_impute(Series.from_values(values), strategy)


def test_baseline_rejects_unknown_strategy():
    with pytest.raises(ImputationError):
        baseline_impute(Series.from_values([1.0, None]), 'median')
