"""
Evaluate Module

Forecast accuracy against the naive benchmark: mean squared error, RMSE and
Theil's U. Both models are scored on the same transformed scale over the
same target indices.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .exceptions import DiagnosticsError, FitError
from .sarima import FittedModel, forecast
from .series_core import Series


@dataclass(frozen=True)
class ErrorPair:
    """Model and naive one-step errors for identical targets."""

    targets: np.ndarray
    model: np.ndarray
    naive: np.ndarray

    def __len__(self) -> int:
        return int(self.targets.size)


@dataclass(frozen=True)
class EvaluationReport:
    """MSE/RMSE rows for the model and the naive benchmark plus Theil's U."""

    label: str
    mse_model: float
    rmse_model: float
    mse_naive: float
    rmse_naive: float
    theil_u: float
    n: int

    @property
    def interpretation(self) -> str:
        return 'better than naive' if self.theil_u < 1.0 else 'not better than naive'

    def to_dict(self) -> dict:
        return {
            'label': self.label,
            'rows': [
                {'model': 'ARIMA', 'mse': self.mse_model, 'rmse': self.rmse_model},
                {'model': 'Naive', 'mse': self.mse_naive, 'rmse': self.rmse_naive},
            ],
            'theil_u': self.theil_u,
            'n': self.n,
            'interpretation': self.interpretation,
        }


def naive_forecast(s: Series) -> Series:
    """
    Predictions Y_hat_{t+1} = Y_t for targets 2..n.

    Raises:
        DiagnosticsError: For fewer than two values or a series with holes.
    """
    if len(s) < 2:
        raise DiagnosticsError(f"naive forecast needs at least 2 values, got {len(s)}")
    if not s.is_complete:
        raise DiagnosticsError("naive forecast needs a fully observed series")
    return Series(s.values[:-1], np.ones(len(s) - 1, dtype=bool), s.origin_offset + 1, s.meta)


def rmse(errors: Sequence[float]) -> Tuple[float, float]:
    """Return (mse, rmse) of the errors."""
    e = np.asarray(errors, dtype=float)
    if e.size == 0:
        raise DiagnosticsError("cannot score an empty error set")
    mse = float(np.mean(e ** 2))
    return mse, math.sqrt(mse)


def theil_u(rmse_model: float, rmse_naive: float) -> float:
    """U = RMSE(model) / RMSE(naive); below 1 the model beats the benchmark."""
    if rmse_naive <= 0.0:
        raise DiagnosticsError("naive RMSE is zero; Theil's U is undefined")
    return float(rmse_model / rmse_naive)


def in_sample_errors(model: FittedModel, history: Series) -> ErrorPair:
    """
    One-step errors of the model (its residuals) and of the naive forecast on
    ``history``, restricted to the residual targets that have a predecessor
    in the history.

    Args:
        model: Fitted model whose residuals are indexed like ``history``.
        history: Transformed pre-difference series the model was fitted on.
    """
    y = history.complete_values('in-sample evaluation')
    targets = model.residuals.indices()
    positions = targets - history.origin_offset
    keep = (positions >= 1) & (positions < y.size)
    positions = positions[keep]
    model_errors = model.residuals.values[keep]
    naive_errors = y[positions] - y[positions - 1]
    return ErrorPair(targets[keep], np.asarray(model_errors, dtype=float), naive_errors)


def score(errors: ErrorPair, label: str = '') -> EvaluationReport:
    """Build a report from aligned error sequences."""
    if len(errors) == 0:
        raise DiagnosticsError("no aligned targets to evaluate")
    mse_model, rmse_model = rmse(errors.model)
    mse_naive, rmse_naive = rmse(errors.naive)
    return EvaluationReport(
        label=label,
        mse_model=mse_model,
        rmse_model=rmse_model,
        mse_naive=mse_naive,
        rmse_naive=rmse_naive,
        theil_u=theil_u(rmse_model, rmse_naive),
        n=len(errors),
    )


def evaluate_model(model: FittedModel, history: Series, label: str = '') -> EvaluationReport:
    """In-sample report of the model against the naive forecast."""
    return score(in_sample_errors(model, history), label)


def holdout_errors(model: FittedModel, history: Series, actual: Series) -> ErrorPair:
    """
    Multi-step errors over a withheld block.

    The model forecasts ``len(actual)`` steps from the end of ``history``;
    the naive forecast repeats the last history value.

    Raises:
        DiagnosticsError: If ``actual`` does not directly follow ``history``.
    """
    if actual.origin_offset != history.origin_offset + len(history):
        raise DiagnosticsError(
            f"holdout starts at {actual.origin_offset}, expected {history.origin_offset + len(history)}"
        )
    target = actual.complete_values('holdout evaluation')
    try:
        result = forecast(model, history, len(actual))
    except FitError as e:
        raise DiagnosticsError(f"holdout forecast failed: {e}") from e
    last = history.complete_values('holdout evaluation')[-1]
    return ErrorPair(actual.indices(), target - result.point, target - last)


def evaluate_holdout(
    model: FittedModel,
    history: Series,
    actual: Series,
    label: str = '',
) -> EvaluationReport:
    """Out-of-sample report over the withheld block."""
    return score(holdout_errors(model, history, actual), label)


def evaluation_block(
    model: FittedModel,
    history: Series,
    label: str = '',
    holdout_model: Optional[FittedModel] = None,
    train: Optional[Series] = None,
    actual: Optional[Series] = None,
) -> dict:
    """
    Evaluation JSON payload: the in-sample report plus, when a holdout fit is
    given, the out-of-sample report next to it.
    """
    payload = {'in_sample': evaluate_model(model, history, label).to_dict()}
    if holdout_model is not None and train is not None and actual is not None:
        payload['holdout'] = evaluate_holdout(holdout_model, train, actual, label).to_dict()
    return payload
