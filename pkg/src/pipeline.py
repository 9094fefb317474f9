"""
Pipeline Module

Orchestrates the batch workflow: ingest, optional puncture, imputation,
stationarity transforms, identification, estimation, diagnostics,
forecasting and accuracy evaluation, writing every artifact to the output
directory. ``compare`` runs the complete and punctured branches side by
side.
"""

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from .correlogram import Correlogram, correlogram
from .diagnostics import AdequacyReport, adequacy_report, residual_correlogram
from .evaluate import evaluation_block
from .exceptions import ConfigError, NonPositivePhi, ToolkitError
from .filter_impute import (
    BASELINE_STRATEGIES,
    STRATEGY_ALIASES,
    FilterSpec,
    ImputationResult,
    baseline_impute,
    estimate_phi,
    filter_series,
    impute,
)
from .ingest import (
    DIVISORS,
    HoleSet,
    MonthlySeries,
    daily_from_monthly,
    daily_to_csv,
    monthly_to_csv,
    puncture,
    read_series_file,
)
from .sarima import FittedModel, ForecastResult, ModelOrder, fit, forecast, simulate_sarima
from .series_core import (
    MeanTest,
    Series,
    difference_for_order,
    history_to_json,
    log_transform,
    mean_significance,
)
from .utils import DEFAULT_SETTINGS, ensure_output_dir, load_config, write_json_atomic, write_text_atomic

logger = logging.getLogger(__name__)

IMPUTE_STRATEGIES = ('filter',) + BASELINE_STRATEGIES + tuple(STRATEGY_ALIASES)


@dataclass(frozen=True)
class PipelineConfig:
    """Validated run settings; command-line flags override the settings file."""

    input: Optional[str] = None
    out: str = 'output'
    label: Optional[str] = None
    season: int = 12
    log: bool = True
    offset: Optional[float] = None
    order: str = '1,0,0,0,1,1'
    phi: Optional[float] = None
    phi_fallback: Optional[float] = 0.5
    M: int = 12
    normalize_weights: bool = True
    impute_strategy: str = 'filter'
    prefilter: bool = False
    divisor: str = 'calendar'
    holes: int = 0
    seed: int = 0
    horizon: int = 12
    level: float = 0.95
    force_mean: bool = False
    lags: Tuple[int, ...] = (6, 12, 18, 24, 30, 36)
    alpha: float = 0.05
    holdout: int = 0
    max_iter: int = 200
    model_order: ModelOrder = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lags = self.lags
        if isinstance(lags, str):
            lags = [part for part in lags.split(',') if part.strip()]
        try:
            lags = tuple(int(k) for k in lags)
        except (TypeError, ValueError):
            raise ConfigError(f"lags must be integers, got {self.lags!r}") from None
        object.__setattr__(self, 'lags', lags)
        object.__setattr__(self, 'model_order', ModelOrder.parse(str(self.order), self.season))
        self._validate()

    def _validate(self):
        if not 0.0 < self.level < 1.0:
            raise ConfigError(f"level must lie in (0, 1), got {self.level}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        for name in ('M', 'holes', 'holdout'):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if self.horizon < 1:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.max_iter < 1:
            raise ConfigError(f"max_iter must be positive, got {self.max_iter}")
        if not self.lags or min(self.lags) < 1:
            raise ConfigError(f"Ljung-Box lags must be positive, got {list(self.lags)}")
        if self.impute_strategy not in IMPUTE_STRATEGIES:
            raise ConfigError(f"impute_strategy must be one of {IMPUTE_STRATEGIES}, got '{self.impute_strategy}'")
        if self.divisor not in DIVISORS:
            raise ConfigError(f"divisor must be one of {DIVISORS}, got '{self.divisor}'")
        if self.phi is not None and not 0.0 < self.phi < 1.0:
            raise ConfigError(f"phi must lie in (0, 1), got {self.phi}")
        if self.phi_fallback is not None and not 0.0 < self.phi_fallback < 1.0:
            raise ConfigError(f"phi_fallback must lie in (0, 1), got {self.phi_fallback}")

    @classmethod
    def from_mapping(
        cls,
        settings: Optional[Mapping[str, Any]] = None,
        overrides: Optional[Mapping[str, Any]] = None,
    ) -> 'PipelineConfig':
        """
        Merge built-in defaults, a settings mapping and flag overrides.

        Args:
            settings: Flat mapping from the YAML settings file.
            overrides: Command-line values; None entries are ignored.

        Raises:
            ConfigError: On unknown keys or invalid values.
        """
        merged: Dict[str, Any] = dict(DEFAULT_SETTINGS)
        for source in (settings or {}, {k: v for k, v in (overrides or {}).items() if v is not None}):
            unknown = set(source) - set(DEFAULT_SETTINGS)
            if unknown:
                raise ConfigError(f"unknown setting(s): {', '.join(sorted(unknown))}")
            merged.update(source)
        names = {f.name for f in fields(cls) if f.init}
        return cls(**{k: v for k, v in merged.items() if k in names})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.init}


@dataclass
class Branch:
    """Everything one dataset produces on its way through the pipeline."""

    label: str
    monthly: MonthlySeries
    holes: Optional[HoleSet] = None
    imputation: Optional[ImputationResult] = None
    transformed: Optional[Series] = None
    working: Optional[Series] = None
    mean_test: Optional[MeanTest] = None
    identification: Optional[Correlogram] = None
    working_identification: Optional[Correlogram] = None
    model: Optional[FittedModel] = None
    adequacy: Optional[AdequacyReport] = None
    forecast: Optional[ForecastResult] = None
    evaluation: Optional[dict] = None

    def summary(self) -> dict:
        """Tables-shaped summary used in the comparison report."""
        out: Dict[str, Any] = {'label': self.label}
        if self.holes is not None:
            out['holes'] = self.holes.to_dict()
        if self.imputation is not None:
            out['imputation'] = self.imputation.to_dict()
        if self.mean_test is not None:
            out['mean_test'] = self.mean_test.to_dict()
        if self.model is not None:
            out['model'] = self.model.to_dict()
        if self.adequacy is not None:
            out['diagnostics'] = self.adequacy.to_dict()
        if self.forecast is not None:
            out['forecast'] = self.forecast.rows()
        if self.evaluation is not None:
            out['evaluation'] = self.evaluation
        return out


class BoxJenkinsPipeline:
    """Runs the identify-estimate-check-forecast cycle on one input file."""

    def __init__(self, config: Optional[PipelineConfig] = None):
        """
        Initialize the pipeline.

        Args:
            config: Run settings. If None, loads them from the settings file.
        """
        if config is None:
            config = PipelineConfig.from_mapping(load_config())
        self.config = config
        self.order = config.model_order
        self.out_dir = Path(config.out)

    # Stages

    def load(self) -> MonthlySeries:
        """Read the configured daily or monthly input file."""
        if not self.config.input:
            raise ConfigError("no input file configured (--input)")
        monthly = read_series_file(Path(self.config.input), self.config.label, self.config.divisor)
        logger.info("loaded %d months (%d observed) from %s", len(monthly), monthly.n_observed, self.config.input)
        return monthly

    def puncture(self, monthly: MonthlySeries) -> Tuple[MonthlySeries, HoleSet]:
        """Remove ``holes`` random observed months with the configured seed."""
        punctured, holes = puncture(monthly, self.config.holes, self.config.seed)
        logger.info("punched %d holes (seed %d)", len(holes), holes.seed)
        return punctured, holes

    def filter_spec(self, series: Series) -> FilterSpec:
        """
        Filter settings, estimating phi from the data unless configured.

        An estimate outside (0, 1) falls back to ``phi_fallback``; with no
        fallback configured the NonPositivePhi error propagates.
        """
        phi = self.config.phi
        if phi is None:
            try:
                phi = estimate_phi(series)
            except NonPositivePhi as e:
                if self.config.phi_fallback is None:
                    raise
                phi = self.config.phi_fallback
                logger.warning("lag-1 autocorrelation %.6f is not in (0, 1); using phi_fallback %g",
                               e.phi, phi)
        return FilterSpec(phi, self.config.M, self.config.normalize_weights)

    def impute(self, series: Series) -> ImputationResult:
        """Fill every missing month with the configured strategy."""
        strategy = self.config.impute_strategy
        if series.is_complete:
            fill_mean = float(series.observed_values().mean())
            return ImputationResult(series, {}, fill_mean, strategy)
        if strategy == 'filter':
            return impute(series, self.filter_spec(series))
        return baseline_impute(series, strategy)

    def transform(self, filled: Series) -> Tuple[Series, Series]:
        """
        Optional whole-series prefilter, then log, then differencing.

        Returns:
            (transformed pre-difference series, working series).
        """
        series = filled
        if self.config.prefilter:
            series = filter_series(series, self.filter_spec(series))
        if self.config.log:
            series = log_transform(series, self.config.offset)
        working = difference_for_order(series, self.order.d, self.order.D, self.order.s)
        return series, working

    def decide_mean(self, transformed: Series, working: Series) -> MeanTest:
        """Mean-retention t-test on the working series."""
        return mean_significance(working, b=self.order.first_computable, n=len(transformed))

    def fit_model(self, working: Series, include_mean: bool) -> FittedModel:
        model = fit(working, self.order, include_mean=include_mean, max_iter=self.config.max_iter)
        logger.info("fitted %s in %d iterations (%s)", self.order, model.iterations, model.reason)
        return model

    def holdout_fit(self, transformed: Series, include_mean: bool) -> Tuple[FittedModel, Series, Series]:
        """Fit on all but the last ``holdout`` months."""
        k = self.config.holdout
        train = transformed.head(len(transformed) - k)
        actual = transformed.tail(k)
        working = difference_for_order(train, self.order.d, self.order.D, self.order.s)
        return self.fit_model(working, include_mean), train, actual

    # Composite runs

    def prepare(self, monthly: MonthlySeries, label: str, holes: Optional[HoleSet] = None) -> Branch:
        """Impute and transform one dataset, computing identification plots."""
        branch = Branch(label, monthly, holes)
        branch.imputation = self.impute(monthly.to_series())
        branch.transformed, branch.working = self.transform(branch.imputation.series)
        branch.identification = correlogram(branch.transformed)
        if len(branch.working) != len(branch.transformed):
            branch.working_identification = correlogram(branch.working)
        branch.mean_test = self.decide_mean(branch.transformed, branch.working)
        return branch

    def estimate(self, branch: Branch) -> Branch:
        include_mean = self.config.force_mean or branch.mean_test.retain_mean
        branch.model = self.fit_model(branch.working, include_mean)
        return branch

    def complete_branch(self, branch: Branch) -> Branch:
        """Estimate, check, forecast and evaluate a prepared branch."""
        if branch.model is None:
            self.estimate(branch)
        branch.adequacy = adequacy_report(branch.model, self.config.lags, self.config.alpha)
        branch.forecast = forecast(branch.model, branch.transformed, self.config.horizon, self.config.level)
        if self.config.holdout > 0:
            holdout_model, train, actual = self.holdout_fit(branch.transformed, branch.model.include_mean)
            branch.evaluation = evaluation_block(branch.model, branch.transformed, branch.label,
                                                 holdout_model, train, actual)
        else:
            branch.evaluation = evaluation_block(branch.model, branch.transformed, branch.label)
        return branch

    def source(self) -> Tuple[MonthlySeries, Optional[HoleSet]]:
        """Loaded series, punctured when holes are configured."""
        monthly = self.load()
        if self.config.holes > 0:
            return self.puncture(monthly)
        return monthly, None

    def run(self) -> Branch:
        """Full single-dataset pipeline; all artifacts go to the output directory."""
        monthly, holes = self.source()
        branch = self.prepare(monthly, monthly.label, holes)
        self.write_identification(branch)
        self.write_imputation(branch)
        self.complete_branch(branch)
        self.write_model(branch)
        self.write_diagnostics(branch)
        self.write_forecast(branch)
        self.write_evaluation(branch)
        return branch

    def compare(self) -> dict:
        """
        Fit the same order on the complete data and on the punctured, imputed
        data and write both branches plus a side-by-side report.

        A failing branch is recorded in the report, which is still written,
        and the first failure is re-raised afterwards.
        """
        monthly = self.load()
        punctured, holes = self.puncture(monthly)
        report: Dict[str, Any] = {
            'config': self.config.to_dict(),
            'order': self.order.to_dict(),
            'holes': holes.to_dict(),
            'branches': {},
        }
        failure: Optional[ToolkitError] = None
        branches: Dict[str, Branch] = {}

        for name, data, hole_set in (('complete', monthly, None), ('missing', punctured, holes)):
            try:
                branch = self.complete_branch(self.prepare(data, name, hole_set))
                branches[name] = branch
                report['branches'][name] = branch.summary()
                self.write_branch(branch, self.out_dir / name)
            except ToolkitError as e:
                logger.warning("%s branch failed: %s", name, e)
                report['branches'][name] = {'label': name, 'error': str(e), 'stage': e.stage,
                                            'exit_code': e.exit_code}
                failure = failure or e

        if len(branches) == 2:
            u_complete = branches['complete'].evaluation['in_sample']['theil_u']
            u_missing = branches['missing'].evaluation['in_sample']['theil_u']
            report['theil_u'] = {
                'complete': u_complete,
                'missing': u_missing,
                'difference': abs(u_complete - u_missing),
            }
        write_json_atomic(self.out_dir / 'comparison.json', report)
        if failure is not None:
            raise failure
        return report

    # Writers

    def write_branch(self, branch: Branch, directory: Path):
        previous = self.out_dir
        self.out_dir = directory
        try:
            self.write_identification(branch)
            self.write_imputation(branch)
            self.write_model(branch)
            self.write_diagnostics(branch)
            self.write_forecast(branch)
            self.write_evaluation(branch)
        finally:
            self.out_dir = previous

    def write_monthly(self, monthly: MonthlySeries, holes: Optional[HoleSet] = None) -> Path:
        path = write_text_atomic(self.out_dir / 'monthly.csv', monthly_to_csv(monthly))
        if holes is not None:
            write_json_atomic(self.out_dir / 'holes.json', holes.to_dict())
        return path

    def write_identification(self, branch: Branch) -> Path:
        write_text_atomic(self.out_dir / 'acf_pacf.csv', branch.identification.to_csv())
        payload = {
            'label': branch.label,
            'transformed': branch.identification.summary(),
            'mean_test': branch.mean_test.to_dict() if branch.mean_test else None,
        }
        if branch.working_identification is not None:
            write_text_atomic(self.out_dir / 'acf_pacf_working.csv', branch.working_identification.to_csv())
            payload['working'] = branch.working_identification.summary()
        write_text_atomic(self.out_dir / 'transform_history.json', history_to_json(branch.working) + '\n')
        return write_json_atomic(self.out_dir / 'identify.json', payload)

    def write_imputation(self, branch: Branch) -> Path:
        payload = branch.imputation.to_dict()
        payload['holes_punched'] = branch.holes.to_dict() if branch.holes else None
        write_text_atomic(self.out_dir / 'imputed.csv',
                          monthly_to_csv(branch.monthly.with_series(branch.imputation.series)))
        return write_json_atomic(self.out_dir / 'imputation.json', payload)

    def write_model(self, branch: Branch) -> Path:
        payload = branch.model.to_dict()
        payload['mean_test'] = branch.mean_test.to_dict() if branch.mean_test else None
        return write_json_atomic(self.out_dir / 'model.json', payload)

    def write_diagnostics(self, branch: Branch) -> Path:
        write_text_atomic(self.out_dir / 'residual_acf.csv', residual_correlogram(branch.model).to_csv())
        payload = branch.adequacy.to_dict()
        for row, data in zip(branch.adequacy.rows, payload['rows']):
            data['critical_value'] = row.critical_value(branch.adequacy.alpha)
        return write_json_atomic(self.out_dir / 'diagnostics.json', payload)

    def write_forecast(self, branch: Branch) -> Path:
        frame = pd.DataFrame(branch.forecast.rows())
        text = frame.to_csv(index=False, lineterminator='\n', float_format='%.10g')
        return write_text_atomic(self.out_dir / 'forecast.csv', text)

    def write_evaluation(self, branch: Branch) -> Path:
        return write_json_atomic(self.out_dir / 'evaluation.json', branch.evaluation)


def simulate_rainfall(
    order: ModelOrder,
    coefficients: Mapping[str, float],
    sigma: float,
    n: int,
    seed: int,
    start: Tuple[int, int] = (1980, 1),
    log_level: float = 1.0,
    amplitude: float = 1.5,
    label: str = 'synthetic',
) -> MonthlySeries:
    """
    Synthetic monthly rainfall.

    The log of the series is ``log_level`` plus an annual cosine cycle of
    the given amplitude (peak in January) plus a seasonal ARIMA path. A
    lag-12 difference of the log removes the cycle.
    """
    log_path = simulate_sarima(order, coefficients, sigma, n, seed)
    month_of_year = (start[1] - 1 + np.arange(n)) % 12
    cycle = amplitude * np.cos(2.0 * np.pi * month_of_year / 12.0)
    values = np.exp(log_path.values + log_level + cycle)
    return MonthlySeries(start, values, np.ones(n, dtype=bool), label)


def write_simulation(monthly: MonthlySeries, path: Path, daily: bool = True) -> Path:
    """Write a simulated series as a daily or monthly input file."""
    text = daily_to_csv(daily_from_monthly(monthly)) if daily else monthly_to_csv(monthly)
    ensure_output_dir(Path(path).parent)
    return write_text_atomic(path, text)


def parse_coefficients(items: List[str]) -> Dict[str, float]:
    """Parse ``name=value`` pairs such as ``ar1=0.16``."""
    out: Dict[str, float] = {}
    for item in items:
        name, sep, value = item.partition('=')
        if not sep:
            raise ConfigError(f"coefficient must look like name=value, got '{item}'")
        try:
            out[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"invalid coefficient value in '{item}'") from None
    return out
