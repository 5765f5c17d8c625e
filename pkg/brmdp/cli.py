#!/usr/bin/env python3
"""
Command line interface for brmdp.
"""

import math
import sys
import logging
from datetime import datetime

import click

from . import __version__
from .bandit import regret_curve
from .callbacks import LoggingCallback
from .config import builtin_config, load_bandit_config, load_config, read_json, PRESETS
from .errors import BRMDPError, ConfigurationError
from .exporter import ResultExporter, emit
from .finite import solve as solve_finite
from .harness import optimal_value, run_experiment, run_replication
from .infinite import (EXACT_BACKEND, NSO_BACKEND, OperatorContext, build_universe,
                       value_iteration)
from .tables import SamplingBudget


def configure_logging(verbose=False, quiet=False):
    """Send log records to stdout; ``quiet`` keeps errors only, ``verbose`` adds debug records."""
    if quiet:
        log_level = logging.ERROR
    elif verbose:
        log_level = logging.DEBUG
    else:
        log_level = logging.INFO

    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stdout)]
    )


def load_experiment(config_file, preset, seed=None, **overrides):
    """Load ``--config`` or ``--preset`` (exactly one), applying command line overrides."""
    if (config_file is None) == (preset is None):
        raise click.UsageError("give exactly one of --config and --preset")
    raw = read_json(config_file) if config_file else builtin_config(preset)
    if seed is not None:
        raw['seed'] = seed
    for key, value in overrides.items():
        if value is not None:
            raw[key] = value
    return load_config(raw)


def config_options(command):
    """Attach the shared configuration and logging options."""
    command = click.option('--quiet', '-q', is_flag=True, help='Suppress all logging except errors')(command)
    command = click.option('--verbose', '-v', is_flag=True, help='Enable detailed debug logging')(command)
    command = click.option('--preset', type=click.Choice(sorted(PRESETS)),
                           help='Use a shipped experiment instead of a file')(command)
    command = click.option('--config', 'config_file', type=click.Path(dir_okay=False),
                           help='Path to a JSON experiment configuration')(command)
    return command


@click.group()
@click.version_option(version=__version__)
def cli():
    """Bayesian Risk MDP solvers and experiments"""
    pass


@cli.command()
@config_options
@click.option('--out', 'output_dir', help='Directory for the CSV files (default: the config output)')
@click.option('--threads', type=click.IntRange(min=1), help='Worker processes for replications')
@click.option('--seed', type=click.IntRange(min=0), help='Override the experiment seed')
def experiment(config_file, preset, output_dir, threads, seed, verbose, quiet):
    """Run every replication of an experiment and write the CSV files"""
    configure_logging(verbose, quiet)
    start_time = datetime.now()
    logging.info("Experiment started at: %s", start_time.strftime('%Y-%m-%d %H:%M:%S'))
    try:
        config = load_experiment(config_file, preset, seed)
        output_dir = output_dir or config.output
        if not output_dir:
            raise ConfigurationError("no output directory: pass --out or set output in the configuration")
        results, rows = run_experiment(config, threads, LoggingCallback())
        emit(results, rows, output_dir, config.histogram_bin_width)
    except BRMDPError as e:
        logging.error("%s", e)
        sys.exit(1)
    end_time = datetime.now()
    logging.info("Experiment finished at: %s", end_time.strftime('%Y-%m-%d %H:%M:%S'))
    logging.info("Total execution time: %s", end_time - start_time)


@cli.command()
@config_options
@click.option('--horizon', type=click.Choice(['finite', 'infinite']), default='finite',
              help='Solve the finite-horizon problem or run value iteration')
@click.option('--solver', type=click.Choice(['exact', 'nso', 'ucb']), help='Finite-horizon solver')
@click.option('--formulation', type=click.Choice(['mean', 'var', 'cvar']), default='mean',
              help='Risk functional (default: mean)')
@click.option('--gamma', type=float, help='Discount factor of the infinite horizon')
@click.option('--epsilon', type=float, help='Target accuracy of value iteration')
@click.option('--backend', type=click.Choice([EXACT_BACKEND, NSO_BACKEND]), help='Bellman operator backend')
@click.option('--universe-depth', type=click.IntRange(min=0), help='Belief updates explored for the universe')
def solve(config_file, preset, horizon, solver, formulation, gamma, epsilon, backend, universe_depth, verbose, quiet):
    """Solve from the prior and print the root value and first action"""
    configure_logging(verbose, quiet)
    try:
        config = load_experiment(config_file, preset)
        rho = config.risk(formulation)
        if horizon == 'finite':
            env = config.build_environment()
            policy = solve_finite(env, config.prior, rho, solver=solver or config.solver, budget=config.budget,
                                  seed=config.seed, grid=config.posterior_grid, state_cap=config.state_cap,
                                  **config.solver_options)
            value = policy.root_value()
            action = policy.act(0, policy.root_state, policy.root_belief)
        else:
            settings = config.infinite
            env = config.build_environment(horizon=math.inf, gamma=gamma or settings.gamma)
            depth = settings.universe_depth if universe_depth is None else universe_depth
            universe = build_universe(env, config.prior, depth, config.posterior_grid)
            logging.info("Universe holds %d augmented states", len(universe))
            context = OperatorContext(env, rho, universe, backend or settings.backend,
                                      SamplingBudget(settings.outer, settings.inner), config.seed,
                                      config.posterior_grid)
            result = value_iteration(context, epsilon=epsilon or settings.epsilon,
                                     max_iterations=settings.max_iterations)
            logging.info("Value iteration: %d iterations, converged=%s", result.iterations, result.converged)
            value = float(result.values[0])
            action = result.policy.act(0, result.policy.root_state, result.policy.root_belief)
    except BRMDPError as e:
        logging.error("%s", e)
        sys.exit(1)
    click.echo("value: %.10g" % value)
    click.echo("action: %s" % action)


@cli.command()
@config_options
@click.option('--formulation', type=click.Choice(['mean', 'var', 'cvar', 'empirical']), default='mean',
              help='Formulation to solve (default: mean)')
@click.option('--data-size', type=click.IntRange(min=0), help='Dataset size H (default: the first configured)')
@click.option('--replication', type=click.IntRange(min=0), default=0, help='Replication index')
@click.option('--rollouts', type=click.IntRange(min=1), help='Evaluate by this many rollouts instead')
def evaluate(config_file, preset, formulation, data_size, replication, rollouts, verbose, quiet):
    """Solve one replication and report its true performance against V*"""
    configure_logging(verbose, quiet)
    try:
        overrides = {}
        if rollouts is not None:
            overrides['evaluation'] = {'mode': 'rollout', 'episodes': rollouts}
        config = load_experiment(config_file, preset, **overrides)
        if formulation in ('var', 'cvar') and config.alpha is None:
            raise ConfigurationError("%s needs alpha in the configuration" % formulation)
        data_size = config.data_sizes[0] if data_size is None else data_size
        optimum, _ = optimal_value(config)
        result = run_replication((config, formulation, data_size, replication))
        if result.error:
            raise ConfigurationError(result.error)
    except BRMDPError as e:
        logging.error("%s", e)
        sys.exit(1)
    click.echo("value: %.10g" % result.value)
    if result.stderr:
        click.echo("stderr: %.10g" % result.stderr)
    click.echo("optimum: %.10g" % optimum)
    click.echo("relative deviation: %.6g" % ((result.value - optimum) / optimum))


@cli.command()
@click.option('--config', 'config_file', required=True, type=click.Path(dir_okay=False),
              help='Path to a JSON bandit configuration')
@click.option('--out', 'output_dir', help='Directory for regret.csv (default: the config output)')
@click.option('--verbose', '-v', is_flag=True, help='Enable detailed debug logging')
@click.option('--quiet', '-q', is_flag=True, help='Suppress all logging except errors')
def bandit(config_file, output_dir, verbose, quiet):
    """Simulate the UCB rule and write its regret curve"""
    configure_logging(verbose, quiet)
    try:
        config = load_bandit_config(config_file)
        output_dir = output_dir or config.output
        if not output_dir:
            raise ConfigurationError("no output directory: pass --out or set output in the configuration")
        points = regret_curve(config.instance, config.checkpoints, config.runs, config.seed)
        ResultExporter(output_dir).write_regret(points)
    except BRMDPError as e:
        logging.error("%s", e)
        sys.exit(1)
    for point in points:
        click.echo("n=%d regret=%.6g bound=%.6g" % (point.plays, point.mean_regret, point.bound))


if __name__ == '__main__':
    cli()
