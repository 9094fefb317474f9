#!/usr/bin/env python3
"""
Rainfall Forecasting CLI

Main entry point for the Box-Jenkins batch pipeline on monthly rainfall.
"""

import functools
import logging
import sys
from pathlib import Path

import click
from click.core import ParameterSource
from colorama import init, Fore, Style

from src.exceptions import ToolkitError
from src.ingest import puncture
from src.pipeline import (
    BoxJenkinsPipeline,
    Branch,
    PipelineConfig,
    parse_coefficients,
    simulate_rainfall,
    write_simulation,
)
from src.sarima import ModelOrder
from src.utils import load_config

# Initialize colorama for colored output
init(autoreset=True)

SETTING_PARAMS = (
    'input', 'out', 'label', 'season', 'log', 'offset', 'order', 'phi', 'phi_fallback', 'M',
    'impute_strategy', 'prefilter', 'divisor', 'holes', 'seed', 'horizon',
    'level', 'force_mean', 'lags', 'alpha', 'holdout', 'max_iter',
)


def pipeline_options(func):
    """Flags shared by every pipeline command; each overrides the settings file."""
    options = [
        click.option('--config', 'config_path', type=click.Path(dir_okay=False),
                     help='Settings file (default: $RAINFALL_CONFIG or config/settings.yaml)'),
        click.option('--input', '-i', type=click.Path(exists=True, dir_okay=False),
                     help='Daily (date,value) or monthly (year,month,value,observed) CSV'),
        click.option('--out', '-o', type=click.Path(file_okay=False), help='Output directory'),
        click.option('--label', help='Series label (default: input file stem)'),
        click.option('--order', help='Model order p,d,q,P,D,Q'),
        click.option('--s', 'season', type=int, help='Season length'),
        click.option('--log/--no-log', 'log', default=True, help='Natural-log transform'),
        click.option('--offset', type=float, help='Additive offset inside the log'),
        click.option('--phi', type=float, help='Filter correlation base (default: lag-1 autocorrelation)'),
        click.option('--phi-fallback', type=float,
                     help='Filter base used when the lag-1 autocorrelation is not in (0, 1)'),
        click.option('--M', 'M', type=int, help='Filter window length'),
        click.option('--impute-strategy', type=click.Choice(['filter', 'mean', 'naive', 'trend', 'bounding']),
                     help='How missing months are filled'),
        click.option('--prefilter', is_flag=True, help='Smooth the whole series with the filter first'),
        click.option('--divisor', type=click.Choice(['calendar', 'present']),
                     help='Monthly average divisor for daily input'),
        click.option('--holes', type=int, help='Number of observed months to remove'),
        click.option('--seed', type=int, help='Seed for hole selection'),
        click.option('--horizon', type=int, help='Forecast horizon in months'),
        click.option('--level', type=float, help='Forecast interval level'),
        click.option('--force-mean', is_flag=True, help='Keep the mean whatever its t-value'),
        click.option('--lags', help='Ljung-Box lags, e.g. 6,12,18,24,30,36'),
        click.option('--alpha', type=float, help='Significance level of the adequacy check'),
        click.option('--holdout', type=int, help='Months withheld for out-of-sample evaluation'),
        click.option('--max-iter', type=int, help='Optimizer iteration cap'),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def handle_errors(func):
    """Report toolkit errors on one red line and exit with the stage code."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ToolkitError as e:
            click.echo(f"{Fore.RED}Error ({e.stage}): {e}{Style.RESET_ALL}", err=True)
            sys.exit(e.exit_code)
        except click.ClickException:
            raise
        except Exception as e:
            click.echo(f"{Fore.RED}Unexpected error: {e}{Style.RESET_ALL}", err=True)
            sys.exit(1)
    return wrapper


def build_pipeline(ctx: click.Context) -> BoxJenkinsPipeline:
    """Merge the settings file with the flags the user actually passed."""
    config_path = ctx.params.get('config_path')
    settings = load_config(Path(config_path) if config_path else None)
    overrides = {
        name: value for name, value in ctx.params.items()
        if name in SETTING_PARAMS and ctx.get_parameter_source(name) is not ParameterSource.DEFAULT
    }
    return BoxJenkinsPipeline(PipelineConfig.from_mapping(settings, overrides))


def prepared(pipeline: BoxJenkinsPipeline) -> Branch:
    monthly, holes = pipeline.source()
    return pipeline.prepare(monthly, monthly.label, holes)


def echo_model(branch: Branch):
    model = branch.model
    click.echo(f"{Fore.CYAN}Model {model.order} (mean {'kept' if model.include_mean else 'dropped'}, "
               f"t = {branch.mean_test.t_value:.5f}){Style.RESET_ALL}")
    click.echo(f"  {'Parameter':<10}{'Estimate':>12}{'Std Error':>12}{'t Value':>10}{'Pr > |t|':>10}{'Lag':>5}")
    for row in model.table():
        click.echo(f"  {row['parameter']:<10}{row['estimate']:>12.5f}{row['std_error']:>12.5f}"
                   f"{row['t_value']:>10.2f}{row['p_value']:>10.4f}{row['lag']:>5}")
    click.echo(f"  {model.equation()}")
    click.echo(f"  sigma^2 = {model.sigma2:.6f}, {model.iterations} iterations ({model.reason})")


def echo_adequacy(branch: Branch):
    report = branch.adequacy
    colour = Fore.GREEN if report.adequate else Fore.YELLOW
    click.echo(f"{Fore.CYAN}Ljung-Box (n' = {report.n_prime}, n_c = {report.n_c}){Style.RESET_ALL}")
    for row in report.rows:
        click.echo(f"  K={row.K:<3} Q*={row.q_star:>8.2f}  dof={row.dof:<3} p={row.p_value:.4f}")
    click.echo(f"{colour}  verdict: {report.verdict}{Style.RESET_ALL}")


@click.group()
@click.option('--verbose', '-v', is_flag=True, help='Enable debug logging')
def cli(verbose):
    """Box-Jenkins forecasting of monthly rainfall with missing-data imputation."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format='%(levelname)s %(name)s: %(message)s',
    )


@cli.command()
@pipeline_options
@click.pass_context
@handle_errors
def ingest(ctx, **_):
    """Aggregate the input to monthly averages (optionally punctured)."""
    pipeline = build_pipeline(ctx)
    monthly, holes = pipeline.source()
    path = pipeline.write_monthly(monthly, holes)
    click.echo(f"{Fore.GREEN}✓ {len(monthly)} months ({monthly.n_observed} observed) written to {path}{Style.RESET_ALL}")
    if holes is not None:
        click.echo(f"  Holes: {list(holes.indices)}")


@cli.command()
@pipeline_options
@click.pass_context
@handle_errors
def identify(ctx, **_):
    """Write ACF/PACF plot data and the spikes beyond the 2/sqrt(n) band."""
    pipeline = build_pipeline(ctx)
    branch = prepared(pipeline)
    path = pipeline.write_identification(branch)
    summary = branch.identification.summary()
    click.echo(f"{Fore.GREEN}✓ {summary['max_lag']} lags written ({path}){Style.RESET_ALL}")
    click.echo(f"  ACF spikes: {summary['acf_spikes']}")
    click.echo(f"  PACF spikes: {summary['pacf_spikes']}")
    if branch.working_identification is not None:
        working = branch.working_identification.summary()
        click.echo(f"  Differenced ACF spikes: {working['acf_spikes']}")
        click.echo(f"  Differenced PACF spikes: {working['pacf_spikes']}")


@cli.command(name='impute')
@pipeline_options
@click.pass_context
@handle_errors
def impute_command(ctx, **_):
    """Fill missing months and write the imputation report."""
    pipeline = build_pipeline(ctx)
    monthly, holes = pipeline.source()
    branch = Branch(monthly.label, monthly, holes, pipeline.impute(monthly.to_series()))
    path = pipeline.write_imputation(branch)
    click.echo(f"{Fore.GREEN}✓ {len(branch.imputation.filled)} months filled "
               f"({branch.imputation.strategy}) ({path}){Style.RESET_ALL}")
    for index, value in sorted(branch.imputation.filled.items()):
        click.echo(f"  month {index + 1}: {value:.4f}")


@cli.command(name='fit')
@pipeline_options
@click.pass_context
@handle_errors
def fit_command(ctx, **_):
    """Estimate the model by conditional least squares."""
    pipeline = build_pipeline(ctx)
    branch = pipeline.estimate(prepared(pipeline))
    pipeline.write_identification(branch)
    path = pipeline.write_model(branch)
    echo_model(branch)
    click.echo(f"{Fore.GREEN}✓ Model written to {path}{Style.RESET_ALL}")


@cli.command()
@pipeline_options
@click.pass_context
@handle_errors
def diagnose(ctx, **_):
    """Ljung-Box adequacy check of the fitted residuals."""
    pipeline = build_pipeline(ctx)
    branch = pipeline.complete_branch(prepared(pipeline))
    path = pipeline.write_diagnostics(branch)
    echo_adequacy(branch)
    click.echo(f"{Fore.GREEN}✓ Diagnostics written to {path}{Style.RESET_ALL}")


@cli.command(name='forecast')
@pipeline_options
@click.pass_context
@handle_errors
def forecast_command(ctx, **_):
    """Point forecasts with intervals."""
    pipeline = build_pipeline(ctx)
    branch = pipeline.complete_branch(prepared(pipeline))
    path = pipeline.write_forecast(branch)
    click.echo(f"{Fore.CYAN}Forecasts ({branch.forecast.level:.0%} interval){Style.RESET_ALL}")
    for row in branch.forecast.rows():
        click.echo(f"  obs {row['obs']}: {row['point']:.4f} [{row['lower']:.4f}, {row['upper']:.4f}]")
    click.echo(f"{Fore.GREEN}✓ Forecasts written to {path}{Style.RESET_ALL}")


@cli.command()
@pipeline_options
@click.pass_context
@handle_errors
def evaluate(ctx, **_):
    """RMSE of the model and the naive forecast, and Theil's U."""
    pipeline = build_pipeline(ctx)
    branch = pipeline.complete_branch(prepared(pipeline))
    path = pipeline.write_evaluation(branch)
    for block, report in branch.evaluation.items():
        click.echo(f"{Fore.CYAN}{block}: U = {report['theil_u']:.6f} ({report['interpretation']}){Style.RESET_ALL}")
        for row in report['rows']:
            click.echo(f"  {row['model']:<6} MSE={row['mse']:.6f} RMSE={row['rmse']:.6f}")
    click.echo(f"{Fore.GREEN}✓ Evaluation written to {path}{Style.RESET_ALL}")


@cli.command()
@pipeline_options
@click.pass_context
@handle_errors
def run(ctx, **_):
    """Full pipeline on one dataset; writes every report."""
    pipeline = build_pipeline(ctx)
    click.echo(f"{Fore.CYAN}Running {pipeline.order} on {pipeline.config.input}{Style.RESET_ALL}")
    branch = pipeline.run()
    echo_model(branch)
    echo_adequacy(branch)
    u = branch.evaluation['in_sample']['theil_u']
    click.echo(f"  Theil's U = {u:.6f}")
    click.echo(f"{Fore.GREEN}✓ Reports written to {pipeline.out_dir}{Style.RESET_ALL}")


@cli.command()
@pipeline_options
@click.pass_context
@handle_errors
def compare(ctx, **_):
    """Complete data against punctured-and-imputed data, same model order."""
    pipeline = build_pipeline(ctx)
    click.echo(f"{Fore.CYAN}Comparing complete and punctured ({pipeline.config.holes} holes) data{Style.RESET_ALL}")
    report = pipeline.compare()
    u = report['theil_u']
    click.echo(f"  Theil's U complete: {u['complete']:.6f}")
    click.echo(f"  Theil's U missing:  {u['missing']:.6f}")
    click.echo(f"{Fore.GREEN}✓ Comparison written to {pipeline.out_dir / 'comparison.json'}{Style.RESET_ALL}")


@cli.command()
@click.option('--out', '-o', required=True, type=click.Path(dir_okay=False), help='File to write')
@click.option('--n', 'n', default=432, show_default=True, help='Number of months')
@click.option('--order', default='1,0,0,0,1,1', show_default=True, help='Model order p,d,q,P,D,Q')
@click.option('--s', 'season', default=12, show_default=True, help='Season length')
@click.option('--coef', 'coefficients', multiple=True, default=('ar1=0.16', 'sma1=0.86'),
              show_default=True, help='Coefficient name=value (repeatable)')
@click.option('--sigma', default=0.9, show_default=True, help='Shock standard deviation (log scale)')
@click.option('--log-level', default=1.0, show_default=True, help='Mean log rainfall')
@click.option('--amplitude', default=1.5, show_default=True, help='Annual cycle amplitude (log scale)')
@click.option('--seed', default=0, show_default=True, help='Random seed')
@click.option('--start', default='1980-01', show_default=True, help='First month YYYY-MM')
@click.option('--holes', default=0, show_default=True, help='Months written as missing')
@click.option('--monthly', is_flag=True, help='Write a monthly file instead of a daily one')
@handle_errors
def simulate(out, n, order, season, coefficients, sigma, log_level, amplitude, seed, start, holes, monthly):
    """Write a synthetic rainfall file whose log follows a seasonal ARIMA process."""
    try:
        year, month = (int(part) for part in start.split('-'))
    except ValueError:
        raise click.BadParameter(f"expected YYYY-MM, got '{start}'", param_hint='--start')
    series = simulate_rainfall(
        ModelOrder.parse(order, season),
        parse_coefficients(list(coefficients)),
        sigma, n, seed, start=(year, month), log_level=log_level, amplitude=amplitude,
    )
    if holes > 0:
        series, _ = puncture(series, holes, seed)
    path = write_simulation(series, Path(out), daily=not monthly)
    click.echo(f"{Fore.GREEN}✓ {n} simulated months written to {path}{Style.RESET_ALL}")


if __name__ == '__main__':
    cli()
