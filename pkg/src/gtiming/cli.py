import functools
import json
import logging
import logging.config
import math
import os

import click
from schematics.exceptions import ValidationError

from . import bench, cohort, config, dgp, methods, resample
from .errors import GTimingError
from .results import SurvivalCurveEstimate, write_curve_csv, write_json
from .util import atomic_write


LOG = logging.getLogger(__name__)


__version__ = None
try:
    from importlib.metadata import PackageNotFoundError, version
    __version__ = version('gtiming')
except (ImportError, PackageNotFoundError):
    pass


def _finite_times(values):
    if not all(math.isfinite(v) for v in values):
        raise ValidationError("evaluation times must be finite")


class _CommonConfig(config.Config):
    seed = config.option(int, default=0, help="Random seed; fully determines the output")
    threads = config.option(int, env='GTIMING_THREADS', default=lambda: os.cpu_count() or 1, min_value=1,
                            help="Worker threads for bootstrap replicates")
    params = config.option(str, help="DGP parameter file (JSON or TOML)")


class SimulateConfig(_CommonConfig):
    scenario = config.option(int, default=2, choices=[1, 2], help="1: no censoring, 2: censoring")
    n = config.option(int, default=dgp.DEFAULT_N, min_value=1, help="Number of subjects")
    out = config.option(str, required=True, help="Output cohort CSV")


class EstimateConfig(_CommonConfig):
    method = config.option(str, default='ipw', choices=list(methods.METHODS), help="Estimation method")
    tau = config.option_list(float, default=lambda: [15.0], min_value=0.0, validators=[_finite_times],
                             help="Evaluation times, in months")
    boot = config.option(int, default=0, min_value=0, help="Bootstrap replicates (0: no interval)")
    level = config.option(float, default=0.95, min_value=0.5, max_value=0.999, help="Interval level")
    a1 = config.option(int, default=1, choices=[0, 1], help="Target first-course treatment")
    a2 = config.option(int, default=1, choices=[0, 1], help="Target second-course treatment")
    truncate = config.option(float, min_value=0.5, max_value=1.0, help="Weight truncation quantile")
    width = config.option(float, default=1.0, min_value=1e-6, help="Interval width for msm, in months")
    J = config.option(int, default=20, min_value=1, help="Number of intervals for msm")
    mc_draws = config.option(int, default=10 ** 5, min_value=1, help="Monte Carlo draws for gcomp")
    input = config.option(str, required=True, help="Input cohort CSV")
    out = config.option(str, required=True, help="Output JSON; a CSV is written next to it")


class Table1Config(_CommonConfig):
    scenario = config.option(int, default=1, choices=[1, 2], help="1: no censoring, 2: censoring")
    reps = config.option(int, default=200, min_value=1, help="Simulated data sets")
    n = config.option(int, default=dgp.DEFAULT_N, min_value=1, help="Subjects per data set")
    B = config.option(int, default=200, min_value=2, help="Bootstrap replicates per data set")
    tau = config.option(float, default=15.0, min_value=0.0, help="Evaluation time, in months")
    level = config.option(float, default=0.95, min_value=0.5, max_value=0.999, help="Interval level")
    out = config.option(str, required=True, help="Output prefix for .json, .md and .csv")


class ExampleConfig(_CommonConfig):
    B = config.option(int, default=300, min_value=2, help="Bootstrap replicates")
    tau_max = config.option(int, default=20, min_value=1, help="Curves are evaluated at 0, 1, ..., tau_max")
    level = config.option(float, default=0.95, min_value=0.5, max_value=0.999, help="Interval level")
    out = config.option(str, required=True, help="Output prefix")


#: Full-scale simulation settings, used by ``bench table1 --full-scale`` unless overridden
FULL_SCALE = {'reps': 1000, 'B': 500}


def _run_config(cls, config_file, defaults=None, **flags):
    """Merge schema defaults < *defaults* < ``--config`` file < explicitly given flags."""
    data = dict(defaults or {})
    if config_file is not None:
        data.update(config.load_data(config_file, 'json'))
    data.update({k: v for k, v in flags.items() if v is not None and v != ()})
    try:
        return config.structure(data, cls)
    except config.ConfigError as e:
        raise click.UsageError(f"invalid configuration: {e}")


def _load_params(run) -> dgp.DgpParams:
    if not run.params:
        return dgp.default_params()
    with open(run.params) as f:
        try:
            return config.load(f, dgp.DgpParams)
        except config.ConfigError as e:
            raise click.UsageError(f"invalid DGP parameters in {run.params}: {e}")


def _parse_taus(values):
    try:
        return [float(t) for v in values for t in v.split(',') if t.strip()]
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint='--tau')


def _reporting_errors(f):
    """Report :exc:`GTimingError` as JSON on stderr and exit with status 1."""
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except GTimingError as e:
            LOG.debug("command failed", exc_info=True)
            click.echo(json.dumps(e.to_dict(), sort_keys=True, default=str), err=True)
            click.get_current_context().exit(1)
    return wrapper


_config_option = click.option('--config', 'config_file', type=click.File('r'), default=None,
                              help='JSON file of option values; flags given explicitly take precedence.')
_seed_option = click.option('--seed', type=int, default=None, help='Random seed. [default: 0]')
_threads_option = click.option('--threads', type=int, default=None,
                               help='Worker threads. [default: $GTIMING_THREADS or all cores]')
_params_option = click.option('--params', type=click.Path(exists=True, dir_okay=False), default=None,
                              help='DGP parameter file. [default: built-in coefficients]')


@click.group(context_settings={
    'help_option_names': ['-h', '--help'],
    'auto_envvar_prefix': 'GTIMING',
})
@click.version_option(version=__version__)
@click.option('--debug', '-d', is_flag=True, default=False,
              help='Turn on debug logging.')
@click.option('--debug-fit', is_flag=True, default=False,
              help='Turn on debug logging for model fitting iterations.')
@click.option('--colour/--no-colour', 'colour_logging', default=None,
              help='Use colour in logging. [default: automatic]')
def main(debug, debug_fit, colour_logging):
    """Estimate survival under two-course treatment sequences with informative timing.
    """
    logging.config.dictConfig({
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'default': {
                'format': '[{asctime}] ({levelname[0]}:{name}) {message}',
                'datefmt': '%Y/%m/%d %H:%M:%S',
                'style': '{',
            },
        },
        'handlers': {
            'pretty': {
                'class': 'gtiming.util.PrettyStreamHandler',
                'level': 'DEBUG',
                'formatter': 'default',
                'colour': colour_logging,
            },
        },
        'root': {
            'level': 'DEBUG' if debug else 'INFO',
            'handlers': ['pretty'],
        },
        'loggers': {
            'gtiming.fitglm': {
                'level': 'DEBUG' if debug_fit else 'INFO',
            },
        },
    })


@main.command()
@_config_option
@click.option('--scenario', type=click.IntRange(1, 2), default=None, help='1: no censoring, 2: censoring.')
@click.option('--n', 'n', type=int, default=None, help='Number of subjects. [default: 2000]')
@_seed_option
@_params_option
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Output cohort CSV.')
@_reporting_errors
def simulate(config_file, **flags):
    """Generate a synthetic cohort."""
    run = _run_config(SimulateConfig, config_file, **flags)
    params = dgp.scenario_params(run.scenario, _load_params(run))
    dataset = dgp.generate(params, run.n, run.seed)
    cohort.write_csv(dataset, run.out)
    LOG.info("wrote %d subjects to %s", dataset.n, run.out)


@main.command()
@_config_option
@click.option('--method', type=click.Choice(methods.METHODS), default=None, help='Estimation method. [default: ipw]')
@click.option('--tau', multiple=True, help='Evaluation time(s), comma-separated or repeated. [default: 15]')
@click.option('--boot', type=int, default=None, help='Bootstrap replicates. [default: 0, no interval]')
@click.option('--level', type=float, default=None, help='Interval level. [default: 0.95]')
@click.option('--a1', type=click.IntRange(0, 1), default=None, help='Target first-course treatment. [default: 1]')
@click.option('--a2', type=click.IntRange(0, 1), default=None, help='Target second-course treatment. [default: 1]')
@click.option('--truncate', type=float, default=None, help='Cap weights at this quantile.')
@click.option('--width', type=float, default=None, help='Interval width for msm. [default: 1]')
@click.option('--intervals', 'J', type=int, default=None, help='Number of intervals for msm. [default: 20]')
@click.option('--mc-draws', type=int, default=None, help='Monte Carlo draws for gcomp. [default: 100000]')
@_seed_option
@_threads_option
@click.option('--in', 'input', type=click.Path(exists=True, dir_okay=False), default=None,
              help='Input cohort CSV.')
@click.option('--out', type=click.Path(dir_okay=False), default=None,
              help='Output JSON; the curve CSV is written with a .csv extension.')
@_reporting_errors
def estimate(config_file, tau, **flags):
    """Estimate P(T^{a1,a2} > tau) from a cohort CSV."""
    run = _run_config(EstimateConfig, config_file, tau=_parse_taus(tau) or None, **flags)
    dataset = cohort.read_csv(run.input)
    options = methods.PipelineOptions(a1_target=run.a1, a2_target=run.a2, truncate=run.truncate,
                                      mc_draws=run.mc_draws, mc_seed=run.seed, width=run.width, J=run.J)
    pipeline = methods.get_pipeline(run.method, options)
    taus = list(run.tau)
    points = pipeline(dataset, taus)
    lo = hi = level = None
    replicates = n_failed = 0
    if run.boot:
        result = resample.bootstrap(dataset, methods.as_vector(pipeline, taus), run.boot, run.level, run.seed,
                                    run.threads)
        lo, hi, level = result.lo, result.hi, run.level
        replicates, n_failed = run.boot - result.n_failed, result.n_failed
    curve = SurvivalCurveEstimate(run.method, taus, [p.estimate for p in points], lo, hi, level,
                                  replicates, n_failed, points)
    write_json(curve.to_dict(), run.out)
    write_curve_csv([curve], os.path.splitext(run.out)[0] + '.csv')
    for p in points:
        LOG.info("%s: P(T > %g) = %.6f", run.method, p.tau, p.estimate)


@main.group('bench')
def bench_group():
    """Run the simulation study or the worked example."""


@bench_group.command('table1')
@_config_option
@click.option('--scenario', type=click.IntRange(1, 2), default=None, help='1: no censoring, 2: censoring.')
@click.option('--reps', type=int, default=None, help='Simulated data sets. [default: 200]')
@click.option('--n', 'n', type=int, default=None, help='Subjects per data set. [default: 2000]')
@click.option('--boot', 'B', type=int, default=None, help='Bootstrap replicates per data set. [default: 200]')
@click.option('--tau', type=float, default=None, help='Evaluation time. [default: 15]')
@click.option('--level', type=float, default=None, help='Interval level. [default: 0.95]')
@click.option('--full-scale', is_flag=True, default=False,
              help='Default to 1000 data sets and 500 bootstrap replicates.')
@_seed_option
@_threads_option
@_params_option
@click.option('--out', type=click.Path(dir_okay=False), default=None,
              help='Output prefix for .json, .md and per-replicate .csv.')
@_reporting_errors
def table1(config_file, full_scale, **flags):
    """Simulation study: bias, MSE, interval width and coverage per method."""
    run = _run_config(Table1Config, config_file, FULL_SCALE if full_scale else None, **flags)
    report = bench.run_table1(run.scenario, run.reps, run.n, run.B, run.tau, run.seed, _load_params(run),
                              run.level, run.threads)
    report.write(run.out)
    click.echo(report.to_markdown(), nl=False)


@bench_group.command('example')
@_config_option
@click.option('--boot', 'B', type=int, default=None, help='Bootstrap replicates. [default: 300]')
@click.option('--tau-max', type=int, default=None, help='Last evaluation time. [default: 20]')
@click.option('--level', type=float, default=None, help='Interval level. [default: 0.95]')
@_seed_option
@_threads_option
@_params_option
@click.option('--out', type=click.Path(dir_okay=False), default=None, help='Output prefix.')
@_reporting_errors
def example(config_file, **flags):
    """Worked example: cohort summary and three survival curves with bootstrap bands."""
    run = _run_config(ExampleConfig, config_file, **flags)
    result = bench.run_worked_example(run.seed, run.B, list(range(run.tau_max + 1)), _load_params(run),
                                      run.level, run.threads)
    result.write(run.out)
    s = result.summary
    LOG.info("n=%d: %d second course, %d died and %d censored before; median W1 %.2f, median survival %.2f",
             s.n, s.second_course, s.died_before, s.censored_before, s.median_w1, s.median_survival)


@main.command()
@click.option('--format', 'config_format', type=click.Choice(('json', 'toml')), default=None,
              help='Output format. [default: based on file extension]')
@click.argument('out', type=click.Path(dir_okay=False))
def params(config_format, out):
    """Write the default DGP parameters to OUT."""
    try:
        config_format = config._format_of(out, config_format)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint='OUT')
    with atomic_write(out) as f:
        config.dump(dgp.default_params(), f, config_format)
