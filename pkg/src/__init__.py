"""
Rainfall Box-Jenkins Toolkit

Seasonal ARIMA identification, estimation, diagnostics and forecasting of
monthly rainfall, with filter-based imputation of missing months.
"""

__version__ = "1.0.0"
