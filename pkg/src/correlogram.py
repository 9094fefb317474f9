"""
Correlogram Module

Identification statistics: sample ACF, sample PACF by the Durbin-Levinson
recursion, the n/4 lag cap and the 2/sqrt(n) zero band.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from .exceptions import AcfDomainError, ConditioningError, TransformError
from .series_core import Series

MIN_OBSERVATIONS = 8
PACF_TOLERANCE = 1e-12

SeriesLike = Union[Series, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class Correlogram:
    """ACF/PACF values for lags 1..K with the zero band half-width."""

    n: int
    lags: np.ndarray
    acf: np.ndarray
    pacf: np.ndarray
    band: float

    def spikes(self) -> dict:
        """Lags whose ACF or PACF falls outside the band."""
        return {
            'acf': [int(k) for k, r in zip(self.lags, self.acf) if abs(r) > self.band],
            'pacf': [int(k) for k, r in zip(self.lags, self.pacf) if abs(r) > self.band],
        }

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'lag': self.lags,
            'acf': self.acf,
            'pacf': self.pacf,
            'band': np.full(self.lags.shape, self.band),
        })

    def to_csv(self) -> str:
        return self.to_frame().to_csv(index=False, lineterminator='\n', float_format='%.10g')

    def summary(self) -> dict:
        spikes = self.spikes()
        return {
            'n': self.n,
            'max_lag': int(self.lags[-1]) if self.lags.size else 0,
            'band': self.band,
            'acf_spikes': spikes['acf'],
            'pacf_spikes': spikes['pacf'],
        }


def _values(s: SeriesLike) -> np.ndarray:
    if isinstance(s, Series):
        return s.complete_values('the ACF')
    values = np.asarray(s, dtype=float)
    if np.isnan(values).any():
        raise TransformError("the ACF needs a fully observed series; impute first")
    return values


def max_lag(n: int) -> int:
    """At most n/4 autocorrelations are worth reading."""
    if n < MIN_OBSERVATIONS:
        raise AcfDomainError(f"need at least {MIN_OBSERVATIONS} observations for a correlogram, got {n}")
    return n // 4


def bands(n: int) -> float:
    """Approximate 95% white-noise band half-width, 2/sqrt(n)."""
    if n < MIN_OBSERVATIONS:
        raise AcfDomainError(f"need at least {MIN_OBSERVATIONS} observations for a band, got {n}")
    return 2.0 / np.sqrt(n)


def acf(s: SeriesLike, K: int) -> np.ndarray:
    """
    Sample autocorrelations r_1..r_K with the full-sample mean and lag-0
    denominator.

    Raises:
        AcfDomainError: For a constant series or K outside 1..n-1.
        TransformError: If the series has missing values.
    """
    z = _values(s)
    n = z.size
    if K < 1 or K > n - 1:
        raise AcfDomainError(f"lag cap K={K} must lie in 1..{n - 1}")
    centred = z - z.mean()
    denominator = float(np.dot(centred, centred))
    if denominator == 0.0:
        raise AcfDomainError("ACF undefined for a constant series (zero variance)")
    return np.array([np.dot(centred[:n - k], centred[k:]) / denominator for k in range(1, K + 1)])


def pacf_from_acf(r: Sequence[float]) -> np.ndarray:
    """
    Durbin-Levinson recursion over r_1..r_K.

    phi_kk = (r_k - sum_j phi_{k-1,j} r_{k-j}) / (1 - sum_j phi_{k-1,j} r_j)
    phi_kj = phi_{k-1,j} - phi_kk phi_{k-1,k-j}

    Raises:
        ConditioningError: If a denominator falls below 1e-12 in magnitude.
    """
    r = np.asarray(r, dtype=float)
    K = r.size
    out = np.zeros(K)
    if K == 0:
        return out
    out[0] = r[0]
    previous = np.array([r[0]])
    for k in range(2, K + 1):
        numerator = r[k - 1] - np.dot(previous, r[k - 2::-1])
        denominator = 1.0 - np.dot(previous, r[:k - 1])
        if abs(denominator) < PACF_TOLERANCE:
            raise ConditioningError(k, denominator)
        phi_kk = numerator / denominator
        current = np.empty(k)
        current[:k - 1] = previous - phi_kk * previous[::-1]
        current[k - 1] = phi_kk
        out[k - 1] = phi_kk
        previous = current
    return out


def pacf(s: SeriesLike, K: int) -> np.ndarray:
    """Sample partial autocorrelations for lags 1..K."""
    return pacf_from_acf(acf(s, K))


def correlogram(s: SeriesLike, K: Optional[int] = None) -> Correlogram:
    """
    ACF, PACF and band up to ``K`` (default: the n/4 cap).
    """
    z = _values(s)
    n = z.size
    cap = max_lag(n)
    if K is None:
        K = cap
    elif K > cap:
        raise AcfDomainError(f"K={K} exceeds the n/4 cap {cap}")
    r = acf(z, K)
    return Correlogram(n, np.arange(1, K + 1), r, pacf_from_acf(r), bands(n))

