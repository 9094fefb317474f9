"""
Series Core Module

General series container, the stationarity transforms (natural log,
seasonal/ordinary differencing) with their inverses, summary statistics and
the mean-retention t-test.
"""

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .exceptions import TransformError


@dataclass(frozen=True)
class TransformStep:
    """One entry of a series transform history."""

    kind: str
    lag: int = 0
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ('log', 'diff'):
            raise TransformError(f"unknown transform step '{self.kind}'")
        if self.kind == 'diff' and self.lag < 1:
            raise TransformError("diff step needs a positive lag")

    def to_dict(self) -> dict:
        if self.kind == 'log':
            return {'kind': 'log', 'offset': self.offset}
        return {'kind': 'diff', 'lag': self.lag}


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Series:
    """
    Ordered observations with a missing-value mask.

    Missing cells hold NaN and are never read by the numeric operations
    below, which all go through ``observed_values`` or check ``is_complete``.
    ``origin_offset`` is the index of the first value relative to the
    untransformed series and ``meta`` the transform history.
    """

    values: np.ndarray
    mask: np.ndarray
    origin_offset: int = 0
    meta: Tuple[TransformStep, ...] = field(default_factory=tuple)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.mask, dtype=bool)
        if values.ndim != 1 or mask.shape != values.shape:
            raise TransformError("values and mask must be 1-d and of equal length")
        if self.origin_offset < 0:
            raise TransformError("origin_offset must be non-negative")
        if not np.all(np.isfinite(values[mask])):
            raise TransformError("observed values must be finite")
        values[~mask] = np.nan
        object.__setattr__(self, 'values', _frozen(values))
        object.__setattr__(self, 'mask', _frozen(mask))
        object.__setattr__(self, 'meta', tuple(self.meta))

    @classmethod
    def from_values(
        cls,
        values: Iterable[Optional[float]],
        origin_offset: int = 0,
        meta: Sequence[TransformStep] = (),
    ) -> 'Series':
        """
        Build a series from plain values; None or NaN marks a missing cell.

        Args:
            values: Observations in time order.
            origin_offset: Index of the first value in the original series.
            meta: Transform history.

        Returns:
            New Series.
        """
        raw = [np.nan if v is None else float(v) for v in values]
        array = np.array(raw, dtype=float)
        return cls(array, ~np.isnan(array), origin_offset, tuple(meta))

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    @property
    def is_complete(self) -> bool:
        return bool(self.mask.all())

    @property
    def holes(self) -> List[int]:
        return [int(i) for i in np.flatnonzero(~self.mask)]

    def observed_values(self) -> np.ndarray:
        return self.values[self.mask]

    def complete_values(self, purpose: str = 'this operation') -> np.ndarray:
        """Return the values, refusing series with missing cells."""
        if not self.is_complete:
            raise TransformError(
                f"{purpose} needs a fully observed series "
                f"({len(self) - self.n_observed} missing); impute first"
            )
        return self.values

    def replace(self, values: np.ndarray, mask: Optional[np.ndarray] = None, **changes) -> 'Series':
        """Copy with new values (and optionally mask/offset/meta)."""
        if mask is None:
            mask = ~np.isnan(values)
        return Series(
            values,
            mask,
            changes.get('origin_offset', self.origin_offset),
            changes.get('meta', self.meta),
        )

    def tail(self, k: int) -> 'Series':
        """Last ``k`` positions, offset adjusted."""
        if k < 0 or k > len(self):
            raise TransformError(f"cannot take the last {k} of {len(self)} values")
        start = len(self) - k
        return Series(self.values[start:], self.mask[start:], self.origin_offset + start, self.meta)

    def head(self, k: int) -> 'Series':
        """First ``k`` positions."""
        if k < 0 or k > len(self):
            raise TransformError(f"cannot take the first {k} of {len(self)} values")
        return Series(self.values[:k], self.mask[:k], self.origin_offset, self.meta)

    def indices(self) -> np.ndarray:
        """Absolute indices of every position."""
        return np.arange(len(self)) + self.origin_offset


@dataclass(frozen=True)
class MeanTest:
    """Result of the mean-retention t-test."""

    mean: float
    sd: float
    n: int
    b: int
    t_value: float

    @property
    def retain_mean(self) -> bool:
        """The mean stays in the model only when |t| >= 2."""
        return abs(self.t_value) >= 2.0

    def to_dict(self) -> dict:
        return {
            'mean': self.mean,
            'sd': self.sd,
            'n': self.n,
            'b': self.b,
            't_value': self.t_value,
            'retain_mean': self.retain_mean,
        }


def log_transform(s: Series, offset: Optional[float] = None) -> Series:
    """
    Natural logarithm of the observed values.

    Args:
        s: Input series.
        offset: Optional additive offset (log(x + offset)); disabled when None.

    Returns:
        Log-transformed series with the step recorded in ``meta``.

    Raises:
        TransformError: If an observed value is outside the log domain.
    """
    shift = 0.0 if offset is None else float(offset)
    values = s.values.copy()
    for index in np.flatnonzero(s.mask):
        x = values[index] + shift
        if x <= 0.0:
            hint = '' if offset is not None else '; enable an offset for zero months'
            raise TransformError(
                f"log undefined at index {int(index)} (value {s.values[index]!r}){hint}"
            )
        values[index] = math.log(x)
    return Series(values, s.mask, s.origin_offset, s.meta + (TransformStep('log', offset=shift),))


def inverse_log(values: np.ndarray, step: TransformStep) -> np.ndarray:
    """Map log-scale values back through ``step``."""
    return np.exp(np.asarray(values, dtype=float)) - step.offset


def seasonal_difference(s: Series, lag: int) -> Series:
    """
    Lag-``lag`` difference z_t = y_t - y_{t-lag}.

    Pairs with a missing member are emitted as missing.

    Raises:
        TransformError: If the series is not longer than the lag.
    """
    if lag < 1:
        raise TransformError("difference lag must be positive")
    if len(s) <= lag:
        raise TransformError(f"series of length {len(s)} is too short for lag {lag}")
    mask = s.mask[lag:] & s.mask[:-lag]
    values = np.where(mask, s.values[lag:] - s.values[:-lag], np.nan)
    return Series(values, mask, s.origin_offset + lag, s.meta + (TransformStep('diff', lag=lag),))


def undifference(z: Series, initial: Sequence[float], lag: int) -> Series:
    """
    Invert a lag difference: y_t = z_t + y_{t-lag}.

    Args:
        z: Differenced series.
        initial: The ``lag`` values preceding the first z (pre-difference tail).
        lag: Difference lag.

    Returns:
        Series aligned with ``z`` on the pre-difference scale.
    """
    initial = np.asarray(initial, dtype=float)
    if lag < 1 or initial.shape != (lag,):
        raise TransformError(f"undifference needs exactly {lag} initial values, got {initial.size}")
    out = np.concatenate([initial, np.full(len(z), np.nan)])
    for t in range(len(z)):
        out[t + lag] = z.values[t] + out[t]
    meta = z.meta
    if meta and meta[-1].kind == 'diff' and meta[-1].lag == lag:
        meta = meta[:-1]
    result = out[lag:]
    return Series(result, ~np.isnan(result), z.origin_offset, meta)


def difference_for_order(s: Series, d: int, D: int, season: int) -> Series:
    """Apply D seasonal then d ordinary differences."""
    if d > 2:
        raise TransformError("non-seasonal differencing above order 2 is not supported")
    out = s
    for _ in range(D):
        out = seasonal_difference(out, season)
    for _ in range(d):
        out = seasonal_difference(out, 1)
    return out


def mean_sd(s: Series) -> Tuple[float, float]:
    """
    Sample mean and standard deviation (n - 1 divisor) of the observed values.

    Raises:
        TransformError: With fewer than two observed values.
    """
    observed = s.observed_values()
    if observed.size < 2:
        raise TransformError(f"need at least 2 observed values, got {observed.size}")
    return float(np.mean(observed)), float(np.std(observed, ddof=1))


def mean_t_test(mean: float, sd: float, n: int, b: int) -> MeanTest:
    """
    t = mean / (sd / sqrt(n - b + 1)) for a working series whose first
    computable index is ``b``.
    """
    if b < 1 or n - b + 1 < 2:
        raise TransformError(f"invalid first computable index b={b} for n={n}")
    if sd == 0.0:
        t_value = 0.0 if mean == 0.0 else math.copysign(math.inf, mean)
    else:
        t_value = mean / (sd / math.sqrt(n - b + 1))
    return MeanTest(float(mean), float(sd), int(n), int(b), float(t_value))


def mean_significance(s: Series, b: int, n: Optional[int] = None) -> MeanTest:
    """
    Mean-retention test on a working (differenced) series.

    Args:
        s: Working series.
        b: First computable index, lag*D + d + 1.
        n: Pre-differencing observation count; defaults to len(s) + b - 1.

    Returns:
        MeanTest; the caller drops the mean when |t| < 2.
    """
    if n is None:
        n = len(s) + b - 1
    mean, sd = mean_sd(s)
    return mean_t_test(mean, sd, n, b)


def series_to_csv(s: Series) -> str:
    """Render ``index,value,observed`` CSV; missing values as NA."""
    frame = pd.DataFrame({
        'index': s.indices(),
        'value': [repr(float(v)) if m else 'NA' for v, m in zip(s.values, s.mask)],
        'observed': s.mask.astype(int),
    })
    return frame.to_csv(index=False, lineterminator='\n')


def history_to_json(s: Series) -> str:
    """Transform-history sidecar used to map forecasts back."""
    payload = {
        'origin_offset': s.origin_offset,
        'steps': [step.to_dict() for step in s.meta],
    }
    return json.dumps(payload, indent=2)


def history_from_json(text: str) -> Tuple[TransformStep, ...]:
    """Parse a sidecar written by ``history_to_json``."""
    try:
        payload = json.loads(text)
        return tuple(
            TransformStep(item['kind'], int(item.get('lag', 0)), float(item.get('offset', 0.0)))
            for item in payload['steps']
        )
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise TransformError(f"invalid transform history: {e}") from e
