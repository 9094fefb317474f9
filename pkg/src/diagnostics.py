"""
Diagnostics Module

Residual adequacy checks: the Ljung-Box portmanteau statistic, chi-square
tail probabilities and rejection points, and the multi-lag adequacy report.
"""

import math
import sys
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import gammaln

from .correlogram import Correlogram, acf, correlogram
from .exceptions import DiagnosticsError, TransformError
from .sarima import FittedModel

DEFAULT_LAGS = (6, 12, 18, 24, 30, 36)
DEFAULT_ALPHA = 0.05
GAMMA_ACCURACY = 1e-15
GAMMA_MAX_ITER = 1000


@dataclass(frozen=True)
class LjungBoxRow:
    """One row of the adequacy table."""

    K: int
    q_star: float
    dof: int
    p_value: float
    residual_acf: Tuple[float, ...]

    def critical_value(self, alpha: float = DEFAULT_ALPHA) -> float:
        """Rejection point chi^2_alpha(dof)."""
        return chi_square_quantile(alpha, self.dof)

    def rejects(self, alpha: float = DEFAULT_ALPHA) -> bool:
        return self.p_value < alpha

    def to_dict(self) -> dict:
        return {
            'K': self.K,
            'q_star': self.q_star,
            'dof': self.dof,
            'p_value': self.p_value,
            'autocorrelations': list(self.residual_acf[-6:]),
        }


@dataclass(frozen=True)
class AdequacyReport:
    """Ljung-Box rows for several lags plus the overall verdict."""

    rows: Tuple[LjungBoxRow, ...]
    alpha: float
    n_prime: int
    n_c: int

    @property
    def adequate(self) -> bool:
        return all(row.p_value > self.alpha for row in self.rows)

    @property
    def verdict(self) -> str:
        return 'adequate' if self.adequate else 'inadequate'

    def to_dict(self) -> dict:
        return {
            'rows': [row.to_dict() for row in self.rows],
            'verdict': self.verdict,
            'alpha': self.alpha,
            'n_prime': self.n_prime,
            'n_c': self.n_c,
        }


def _lower_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by its power series."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * GAMMA_ACCURACY:
            return total * math.exp(-x + a * math.log(x) - gammaln(a))
    raise DiagnosticsError(f"incomplete gamma series did not converge (a={a}, x={x})")


def _upper_fraction(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by Lentz's continued fraction."""
    tiny = sys.float_info.min / sys.float_info.epsilon
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, GAMMA_MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < GAMMA_ACCURACY:
            return math.exp(-x + a * math.log(x) - gammaln(a)) * h
    raise DiagnosticsError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def chi_square_sf(x: float, dof: int) -> float:
    """
    Upper-tail probability of the chi-square distribution, Q(dof/2, x/2).

    The series expansion is used below a + 1 and the continued fraction
    above it.
    """
    if x < 0:
        raise DiagnosticsError(f"chi-square argument must be non-negative, got {x}")
    if dof < 1:
        raise DiagnosticsError(f"degrees of freedom must be positive, got {dof}")
    if x == 0:
        return 1.0
    a, half = dof / 2.0, x / 2.0
    if half < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_series(a, half)))
    return min(1.0, max(0.0, _upper_fraction(a, half)))


def chi_square_quantile(alpha: float, dof: int) -> float:
    """
    Point x with chi_square_sf(x, dof) = alpha, by bracketing bisection.
    """
    if not 0.0 < alpha < 1.0:
        raise DiagnosticsError(f"alpha must lie in (0, 1), got {alpha}")
    if dof < 1:
        raise DiagnosticsError(f"degrees of freedom must be positive, got {dof}")
    upper = max(1.0, 2.0 * dof)
    while chi_square_sf(upper, dof) > alpha:
        upper *= 2.0
    return float(bisect(lambda x: chi_square_sf(x, dof) - alpha, 0.0, upper, xtol=1e-10, rtol=1e-15, maxiter=500))


def ljung_box(residual_acf: Sequence[float], n_prime: int, K: int, n_c: int) -> LjungBoxRow:
    """
    Q* = n'(n'+2) sum_{l=1}^{K} r_l^2 / (n' - l) with K - n_c degrees of freedom.

    Args:
        residual_acf: Residual autocorrelations r_1, r_2, ...
        n_prime: Residual count.
        K: Number of lags summed.
        n_c: Number of fitted ARMA coefficients.

    Raises:
        DiagnosticsError: If K <= n_c, n' <= K or the ACF is shorter than K.
    """
    r = np.asarray(residual_acf, dtype=float)
    if K < 1 or K > r.size:
        raise DiagnosticsError(f"K={K} needs at least K residual autocorrelations (have {r.size})")
    if K <= n_c:
        raise DiagnosticsError(f"K={K} must exceed the fitted parameter count {n_c}")
    if n_prime <= K:
        raise DiagnosticsError(f"n'={n_prime} must exceed K={K}")
    lags = np.arange(1, K + 1)
    q_star = float(n_prime * (n_prime + 2) * np.sum(r[:K] ** 2 / (n_prime - lags)))
    dof = K - n_c
    return LjungBoxRow(K, q_star, dof, chi_square_sf(q_star, dof), tuple(float(v) for v in r[:K]))


def adequacy_report(
    model: FittedModel,
    Ks: Iterable[int] = DEFAULT_LAGS,
    alpha: float = DEFAULT_ALPHA,
) -> AdequacyReport:
    """
    Ljung-Box rows for each K from the model's residual ACF; the model is
    adequate when every p-value exceeds ``alpha``.

    Raises:
        DiagnosticsError: Residuals too short for the largest K.
    """
    lags: List[int] = sorted(set(int(k) for k in Ks))
    if not lags:
        raise DiagnosticsError("no Ljung-Box lags requested")
    residuals = model.residuals.values
    n_prime = residuals.size
    if n_prime <= lags[-1]:
        raise DiagnosticsError(f"{n_prime} residuals are too few for K={lags[-1]}")
    try:
        r = acf(residuals, lags[-1])
    except TransformError as e:
        raise DiagnosticsError(f"residual ACF: {e}") from e
    n_c = model.order.n_arma
    rows = tuple(ljung_box(r, n_prime, K, n_c) for K in lags)
    return AdequacyReport(rows, alpha, n_prime, n_c)


def residual_correlogram(model: FittedModel) -> Correlogram:
    """Residual ACF and PACF plot data up to the n/4 cap."""
    try:
        return correlogram(model.residuals)
    except TransformError as e:
        raise DiagnosticsError(f"residual correlogram: {e}") from e
