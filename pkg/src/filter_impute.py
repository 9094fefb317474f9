"""
Filter Imputation Module

The phi-power weighted moving-average filter, missing-value estimation with
that filter (the hole's own slot takes the mean of the observed data), and
the four baseline imputers: series mean, naive forecast, trend regression
and bounding average.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .correlogram import acf
from .exceptions import AcfDomainError, ImputationError, NonPositivePhi, TransformError
from .series_core import Series

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 12
BASELINE_STRATEGIES = ('mean', 'naive', 'trend', 'bounding_average')
STRATEGY_ALIASES = {'bounding': 'bounding_average'}


@dataclass(frozen=True)
class FilterSpec:
    """
    Correlation base ``phi`` and window length ``M``.

    Window slot i (i = 0..M, lag i) carries weight phi^(i+1); with
    ``normalized`` the weights are divided by their sum.
    """

    phi: float
    M: int = DEFAULT_WINDOW
    normalized: bool = True

    def __post_init__(self):
        if not 0.0 < self.phi < 1.0:
            raise TransformError(f"phi must lie in (0, 1), got {self.phi}")
        if self.M < 0:
            raise TransformError(f"window length M must be non-negative, got {self.M}")

    def weights(self, slots: Optional[int] = None) -> np.ndarray:
        """
        Weights for the first ``slots`` window positions (default M + 1).

        Args:
            slots: Number of slots kept when the window is truncated.

        Returns:
            Array w[i] applied to x_{t-i}.
        """
        if slots is None:
            slots = self.M + 1
        raw = self.phi ** np.arange(1, slots + 1)
        if self.normalized:
            return raw / raw.sum()
        return raw

    def to_dict(self) -> dict:
        return {'phi': self.phi, 'M': self.M, 'normalized': self.normalized}


@dataclass(frozen=True)
class ImputationResult:
    """Filled series plus a per-hole account of what was filled."""

    series: Series
    filled: Dict[int, float]
    fill_mean: float
    strategy: str = 'filter'
    spec: Optional[FilterSpec] = None
    windows: Dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'strategy': self.strategy,
            'spec': self.spec.to_dict() if self.spec else None,
            'fill_mean': self.fill_mean,
            'holes': [
                {'index': index, 'value': value, 'window_used': self.windows.get(index)}
                for index, value in sorted(self.filled.items())
            ],
        }


def estimate_phi(s: Series) -> float:
    """
    Lag-1 sample autocorrelation as the filter's correlation base.

    On a series with holes only pairs with both members observed enter the
    numerator; mean and denominator use all observed values.

    Raises:
        AcfDomainError: For a constant series or fewer than 3 observations.
        NonPositivePhi: If the estimate is outside (0, 1).
    """
    if s.n_observed < 3:
        raise AcfDomainError(f"need at least 3 observed values to estimate phi, got {s.n_observed}")
    if s.is_complete:
        phi = float(acf(s, 1)[0])
    else:
        observed = s.observed_values()
        centred = np.where(s.mask, s.values - observed.mean(), 0.0)
        denominator = float(np.dot(centred, centred))
        if denominator == 0.0:
            raise AcfDomainError("ACF undefined for a constant series (zero variance)")
        phi = float(np.dot(centred[:-1], centred[1:]) / denominator)
    if not 0.0 < phi < 1.0:
        raise NonPositivePhi(phi)
    return phi


def filter_series(s: Series, spec: FilterSpec) -> Series:
    """
    y_t = sum_{i=0}^{M} w_{i+1} x_{t-i}, defined for t = M+1..n.

    Raises:
        TransformError: If the series has holes or is not longer than M.
    """
    x = s.complete_values('the filter')
    if len(s) <= spec.M:
        raise TransformError(f"series of length {len(s)} is too short for window M={spec.M}")
    y = np.convolve(x, spec.weights(), mode='valid')
    return Series(y, np.ones(y.size, dtype=bool), s.origin_offset + spec.M, s.meta)


def impute(s: Series, spec: FilterSpec) -> ImputationResult:
    """
    Fill holes left to right with the filter value in which the hole's own
    slot takes the mean of the originally observed values.

    Earlier fills feed later windows. Near the start the window is cut to
    the available slots and the weights renormalized.

    Raises:
        ImputationError: With fewer than two observed values.
    """
    if s.n_observed < 2:
        raise ImputationError(f"need at least 2 observed values to impute, got {s.n_observed}")
    fill_mean = float(s.observed_values().mean())
    values = s.values.copy()
    filled: Dict[int, float] = {}
    windows: Dict[int, int] = {}
    for hole in s.holes:
        slots = min(spec.M, hole) + 1
        window = np.empty(slots)
        window[0] = fill_mean
        window[1:] = values[hole - 1::-1][:slots - 1] if hole > 0 else []
        value = float(np.dot(spec.weights(slots), window))
        values[hole] = value
        filled[hole] = value
        windows[hole] = slots
    logger.debug("filter imputation filled %d holes (phi=%.4f, M=%d)", len(filled), spec.phi, spec.M)
    return ImputationResult(
        s.replace(values, np.ones(len(s), dtype=bool)),
        filled,
        fill_mean,
        'filter',
        spec,
        windows,
    )


def _resolve_strategy(strategy: str) -> str:
    strategy = STRATEGY_ALIASES.get(strategy, strategy)
    if strategy not in BASELINE_STRATEGIES:
        raise ImputationError(f"unknown strategy '{strategy}'; choose from {BASELINE_STRATEGIES}")
    return strategy


def baseline_impute(s: Series, strategy: str) -> ImputationResult:
    """
    Fill holes with one of the baseline rules.

    Args:
        s: Series with holes.
        strategy: ``mean`` (observed mean), ``naive`` (last known value),
            ``trend`` (least-squares line a + b*t over the observed points
            before the hole, t = 0-based index) or ``bounding_average``
            (mean of the nearest observed neighbours on each side).

    Returns:
        ImputationResult with ``spec`` None.

    Raises:
        ImputationError: If the strategy cannot fill some hole.
    """
    strategy = _resolve_strategy(strategy)
    if s.n_observed < 1:
        raise ImputationError("cannot impute an all-missing series")
    observed_idx = np.flatnonzero(s.mask)
    observed = s.values[s.mask]
    fill_mean = float(observed.mean())
    values = s.values.copy()
    filled: Dict[int, float] = {}

    for hole in s.holes:
        if strategy == 'mean':
            value = fill_mean
        elif strategy == 'naive':
            if hole == 0:
                raise ImputationError(f"hole {hole}: naive strategy needs a preceding value")
            value = float(values[hole - 1])
        elif strategy == 'trend':
            before = observed_idx[observed_idx < hole]
            if before.size < 2:
                raise ImputationError(f"hole {hole}: trend strategy needs 2 observed points before it")
            slope, intercept = np.polyfit(before.astype(float), s.values[before], 1)
            value = float(intercept + slope * hole)
        else:
            left = observed_idx[observed_idx < hole]
            right = observed_idx[observed_idx > hole]
            if left.size == 0 or right.size == 0:
                raise ImputationError(
                    f"hole {hole}: bounding_average strategy needs observed values on both sides"
                )
            value = float((s.values[left[-1]] + s.values[right[0]]) / 2.0)
        values[hole] = value
        filled[hole] = value

    return ImputationResult(
        s.replace(values, np.ones(len(s), dtype=bool)),
        filled,
        fill_mean,
        strategy,
    )
