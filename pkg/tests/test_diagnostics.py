from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats
from scipy.signal import lfilter

from src.correlogram import acf
from src.diagnostics import (
    adequacy_report,
    chi_square_quantile,
    chi_square_sf,
    ljung_box,
    residual_correlogram,
)
from src.exceptions import DiagnosticsError
from src.sarima import ModelOrder
from src.series_core import Series

WORKED_ACF = [-0.01576, 0.08733, 0.08257, -0.04915, 0.00493, 0.0019]
MISSING_DATA_ACF = [-0.016, 0.076, 0.071, -0.045, 0.015, -0.023,
                    -0.076, 0.004, -0.049, 0.092, 0.048, -0.070]


def _fake_model(residuals, order=ModelOrder(0, 0, 0, 0, 0, 0)):
    """Only the attributes the adequacy check reads."""
    return SimpleNamespace(residuals=Series.from_values(residuals), order=order)


def test_ljung_box_worked_example():
    row = ljung_box(WORKED_ACF, n_prime=336, K=6, n_c=2)
    assert 5.838 <= row.q_star <= 5.839
    assert row.dof == 4
    assert row.p_value == pytest.approx(0.2116, abs=5e-4)
    assert not row.rejects(0.05)


def test_ljung_box_missing_data_row():
    row = ljung_box(MISSING_DATA_ACF, n_prime=336, K=12, n_c=2)
    assert row.q_star == pytest.approx(13.02, abs=0.1)
    assert row.dof == 10
    assert row.p_value == pytest.approx(0.2227, abs=0.01)


def test_ljung_box_zero_acf():
    row = ljung_box(np.zeros(12), n_prime=100, K=12, n_c=2)
    assert row.q_star == 0.0
    assert row.p_value == 1.0


@pytest.mark.parametrize("K, n_prime, n_c", [(2, 336, 2), (6, 6, 2), (13, 336, 2)])
def test_ljung_box_preconditions(K, n_prime, n_c):
    with pytest.raises(DiagnosticsError):
        ljung_box(MISSING_DATA_ACF, n_prime=n_prime, K=K, n_c=n_c)


def test_q_star_non_decreasing_in_K():
    values = [ljung_box(MISSING_DATA_ACF, 336, K, 2).q_star for K in range(3, 13)]
    assert values == sorted(values)


def test_p_value_and_critical_value_decisions_agree():
    rng = np.random.default_rng(4)
    for _ in range(50):
        r = rng.normal(0.0, 0.08, size=24)
        for K in (6, 12, 24):
            row = ljung_box(r, 300, K, 2)
            assert row.rejects(0.05) == (row.q_star > row.critical_value(0.05))


def test_chi_square_sf_at_zero():
    assert chi_square_sf(0.0, 7) == 1.0


def test_chi_square_sf_reference_tail():
    assert chi_square_sf(5.8385, 4) == pytest.approx(0.2116, abs=5e-4)


@pytest.mark.parametrize("x", [0.1, 1.0, 3.3, 10.0, 40.0])
def test_chi_square_sf_dof_two_closed_form(x):
    assert chi_square_sf(x, 2) == pytest.approx(np.exp(-x / 2.0), abs=1e-12)


def test_chi_square_sf_matches_scipy():
    for dof in (1, 2, 3, 10, 34, 50):
        for x in np.linspace(0.05, 120.0, 40):
            assert abs(chi_square_sf(x, dof) - stats.chi2.sf(x, dof)) < 1e-10


def test_chi_square_sf_strictly_decreasing():
    xs = np.linspace(0.1, 30.0, 60)
    values = [chi_square_sf(x, 6) for x in xs]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_chi_square_sf_rejects_negative_argument():
    with pytest.raises(DiagnosticsError):
        chi_square_sf(-1.0, 3)


@pytest.mark.parametrize("alpha, dof, expected", [(0.05, 6, 12.5916), (0.05, 4, 9.4877)])
def test_chi_square_quantile_rejection_points(alpha, dof, expected):
    assert chi_square_quantile(alpha, dof) == pytest.approx(expected, abs=1e-3)


def test_chi_square_quantile_round_trip():
    for dof in range(1, 51):
        for alpha in (0.01, 0.05, 0.1):
            assert abs(chi_square_sf(chi_square_quantile(alpha, dof), dof) - alpha) < 1e-7


def test_chi_square_quantile_increases_with_dof():
    values = [chi_square_quantile(0.05, dof) for dof in range(1, 30)]
    assert all(a < b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("alpha", [0.0, 1.0])
def test_chi_square_quantile_rejects_alpha(alpha):
    with pytest.raises(DiagnosticsError):
        chi_square_quantile(alpha, 3)


def test_adequacy_report_single_lag_matches_row():
    residuals = np.random.default_rng(2).standard_normal(336)
    report = adequacy_report(_fake_model(residuals, ModelOrder(1, 0, 0, 0, 1, 1)), Ks=[6])
    expected = ljung_box(acf(residuals, 6), 336, 6, 2)
    assert len(report.rows) == 1
    assert report.rows[0].q_star == pytest.approx(expected.q_star)
    assert report.n_prime == 336
    assert report.n_c == 2


def test_adequacy_report_to_dict_layout():
    residuals = np.random.default_rng(3).standard_normal(432)
    payload = adequacy_report(_fake_model(residuals)).to_dict()
    assert [row['K'] for row in payload['rows']] == [6, 12, 18, 24, 30, 36]
    assert set(payload['rows'][0]) == {'K', 'q_star', 'dof', 'p_value', 'autocorrelations'}
    assert payload['verdict'] in ('adequate', 'inadequate')
    assert payload['alpha'] == 0.05


def test_white_noise_rejection_rate_is_near_alpha():
    # six nested tests at alpha 0.05 reject jointly about 11% of the time
    runs = 200
    rejections = np.zeros(6)
    adequate = np.zeros(runs, dtype=bool)
    for seed in range(runs):
        residuals = np.random.default_rng(seed).standard_normal(432)
        report = adequacy_report(_fake_model(residuals))
        rejections += [row.rejects(0.05) for row in report.rows]
        adequate[seed] = report.adequate
    assert np.all(rejections / runs <= 0.10)
    assert adequate[:100].mean() >= 0.85
    assert adequate.mean() >= 0.85


def test_unmodelled_ar1_is_inadequate():
    inadequate = 0
    for seed in range(100):
        shocks = np.random.default_rng(seed).standard_normal(432)
        residuals = lfilter([1.0], [1.0, -0.8], shocks)
        inadequate += not adequacy_report(_fake_model(residuals)).adequate
    assert inadequate >= 99


def test_adequacy_report_needs_enough_residuals():
    with pytest.raises(DiagnosticsError):
        adequacy_report(_fake_model(np.random.default_rng(0).standard_normal(30)))


def test_residual_correlogram_covers_quarter_of_residuals():
    residuals = np.random.default_rng(6).standard_normal(200)
    result = residual_correlogram(_fake_model(residuals))
    assert result.lags[-1] == 50
    assert result.band == pytest.approx(2.0 / np.sqrt(200))
