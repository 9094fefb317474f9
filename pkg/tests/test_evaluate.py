import math

import numpy as np
import pytest

from src.evaluate import (
    ErrorPair,
    evaluate_holdout,
    evaluate_model,
    evaluation_block,
    holdout_errors,
    in_sample_errors,
    naive_forecast,
    rmse,
    score,
    theil_u,
)
from src.exceptions import DiagnosticsError
from src.sarima import ModelOrder, fit, simulate_sarima
from src.series_core import Series, difference_for_order

AIRLINE_LIKE = ModelOrder(1, 0, 0, 0, 1, 1, s=12)


def _fitted(n=240, seed=0):
    y = simulate_sarima(AIRLINE_LIKE, {'ar1': 0.16, 'sma1': 0.86}, 0.9, n, seed)
    z = difference_for_order(y, 0, 1, 12)
    return fit(z, AIRLINE_LIKE), y


def test_naive_forecast_shifts_by_one():
    predictions = naive_forecast(Series.from_values([5.0, 7.0, 9.0]))
    assert predictions.values.tolist() == [5.0, 7.0]
    assert predictions.origin_offset == 1


def test_naive_forecast_of_constant_series_has_zero_error():
    s = Series.from_values([4.0] * 6)
    assert np.all(s.values[1:] - naive_forecast(s).values == 0.0)


def test_naive_forecast_on_unit_step_walk():
    steps = np.random.default_rng(0).choice([-1.0, 1.0], size=50)
    s = Series.from_values(np.cumsum(steps))
    errors = s.values[1:] - naive_forecast(s).values
    assert np.all(np.abs(errors) == 1.0)


@pytest.mark.parametrize("values", [[1.0], [1.0, None, 2.0]])
def test_naive_forecast_preconditions(values):
    with pytest.raises(DiagnosticsError):
        naive_forecast(Series.from_values(values))


def test_rmse_hand_value():
    mse, root = rmse([3.0, -4.0])
    assert mse == 12.5
    assert root == pytest.approx(3.5355339, abs=1e-7)


@pytest.mark.parametrize("mse, expected", [(0.441654, 0.66457), (0.849915, 0.921908)])
def test_rmse_matches_reference_rows(mse, expected):
    assert math.sqrt(mse) == pytest.approx(expected, abs=1e-5)
    _, root = rmse([math.sqrt(mse)] * 4)
    assert root == pytest.approx(expected, abs=1e-5)


def test_rmse_empty_is_error():
    with pytest.raises(DiagnosticsError):
        rmse([])


def test_rmse_grows_when_large_error_appended():
    errors = [0.5, -0.2, 0.1]
    _, before = rmse(errors)
    _, after = rmse(errors + [before * 1.5])
    assert after > before


@pytest.mark.parametrize("model, naive, expected", [
    (0.66457, 0.921908, 0.720864),
    (0.65539, 0.902304, 0.726352),
    (0.8, 0.8, 1.0),
])
def test_theil_u_reference_values(model, naive, expected):
    assert theil_u(model, naive) == pytest.approx(expected, abs=1e-5)


def test_theil_u_undefined_for_perfect_naive():
    with pytest.raises(DiagnosticsError):
        theil_u(0.5, 0.0)


def test_theil_u_is_scale_invariant():
    rng = np.random.default_rng(1)
    pair = ErrorPair(np.arange(20), rng.standard_normal(20), rng.standard_normal(20))
    scaled = ErrorPair(pair.targets, 3.7 * pair.model, 3.7 * pair.naive)
    assert score(scaled).theil_u == pytest.approx(score(pair).theil_u, abs=1e-12)


def test_report_is_internally_consistent():
    model, y = _fitted()
    report = evaluate_model(model, y, 'complete')
    assert report.rmse_model ** 2 == pytest.approx(report.mse_model, abs=1e-12)
    assert report.rmse_naive ** 2 == pytest.approx(report.mse_naive, abs=1e-12)
    assert report.theil_u == pytest.approx(report.rmse_model / report.rmse_naive, abs=1e-12)
    assert report.interpretation == ('better than naive' if report.theil_u < 1 else 'not better than naive')
    payload = report.to_dict()
    assert [row['model'] for row in payload['rows']] == ['ARIMA', 'Naive']
    assert payload['label'] == 'complete'


def test_in_sample_errors_are_aligned():
    model, y = _fitted()
    errors = in_sample_errors(model, y)
    assert len(errors.model) == len(errors.naive) == len(errors.targets)
    assert np.array_equal(errors.targets, model.residuals.indices())
    v = y.values
    assert np.array_equal(errors.naive, v[errors.targets] - v[errors.targets - 1])


def test_in_sample_errors_mean_only_model_oracle():
    z = Series.from_values(np.random.default_rng(7).standard_normal(120))
    model = fit(z, ModelOrder(0, 0, 0, 0, 0, 0), include_mean=True)
    errors = in_sample_errors(model, z)
    assert errors.targets.tolist() == list(range(1, 120))
    assert np.allclose(errors.model, z.values[1:] - z.values.mean(), atol=1e-8)
    assert np.allclose(errors.naive, np.diff(z.values))


def test_score_with_zero_model_errors():
    pair = ErrorPair(np.arange(3), np.zeros(3), np.array([1.0, -1.0, 2.0]))
    report = score(pair)
    assert report.mse_model == 0.0
    assert report.theil_u == 0.0


def test_holdout_naive_repeats_last_value():
    _, y = _fitted(n=240, seed=3)
    train, actual = y.head(228), y.tail(12)
    refit = fit(difference_for_order(train, 0, 1, 12), AIRLINE_LIKE)
    errors = holdout_errors(refit, train, actual)
    assert np.array_equal(errors.naive, actual.values - train.values[-1])
    assert np.array_equal(errors.targets, np.arange(228, 240))
    report = evaluate_holdout(refit, train, actual, 'holdout')
    assert report.n == 12


def test_holdout_must_follow_history():
    model, y = _fitted()
    with pytest.raises(DiagnosticsError):
        holdout_errors(model, y.head(200), y.tail(20))


def test_evaluation_block_adds_holdout():
    model, y = _fitted()
    train, actual = y.head(228), y.tail(12)
    refit = fit(difference_for_order(train, 0, 1, 12), AIRLINE_LIKE)
    block = evaluation_block(model, y, 'complete', refit, train, actual)
    assert set(block) == {'in_sample', 'holdout'}
    assert set(evaluation_block(model, y, 'complete')) == {'in_sample'}
