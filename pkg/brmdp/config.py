"""
Experiment configuration for BR-MDP runs.

This module provides classes for loading JSON experiment configurations,
filling in defaults, validating them and building the environment, prior,
risk functionals and solver settings they describe.

The main class is ConfigParser which turns a JSON file (or an already-loaded
dict) into an :class:`ExperimentConfig`. A module-level function is provided
for convenience. Three reproductions ship as presets, see
:func:`builtin_config`.
"""

import copy
import json
import logging
import math
from dataclasses import dataclass, field, replace

from .bandit import BanditInstance, make_cost
from .environments import InventoryConfig, MazeConfig, build_inventory, build_maze
from .errors import BRMDPError, ConfigurationError
from .model import ParameterSpace, make_family
from .posterior import FinitePosterior, NormalMeanPosterior
from .risk import make_risk
from .tables import SamplingBudget

# Top-level keys
KEY_NAME = 'name'
KEY_ENVIRONMENT = 'environment'
KEY_FAMILY = 'family'
KEY_SPACE = 'parameter_space'
KEY_TRUE_THETA = 'true_theta'
KEY_PRIOR = 'prior'
KEY_FORMULATIONS = 'formulations'
KEY_ALPHA = 'alpha'
KEY_SOLVER = 'solver'
KEY_DATA_SIZES = 'data_sizes'
KEY_REPLICATIONS = 'replications'
KEY_SEED = 'seed'
KEY_EVALUATION = 'evaluation'
KEY_GRID = 'posterior_grid'
KEY_STATE_CAP = 'state_cap'
KEY_BIN_WIDTH = 'histogram_bin_width'
KEY_THREADS = 'threads'
KEY_OUTPUT = 'output'
KEY_INFINITE = 'infinite'

REQUIRED_KEYS = (KEY_NAME, KEY_ENVIRONMENT, KEY_FAMILY, KEY_SPACE, KEY_TRUE_THETA, KEY_PRIOR,
                 KEY_FORMULATIONS, KEY_SOLVER, KEY_DATA_SIZES, KEY_REPLICATIONS, KEY_SEED)
OPTIONAL_KEYS = (KEY_ALPHA, KEY_EVALUATION, KEY_GRID, KEY_STATE_CAP, KEY_BIN_WIDTH, KEY_THREADS,
                 KEY_OUTPUT, KEY_INFINITE)

FORMULATIONS = ('mean', 'var', 'cvar', 'empirical')
SOLVERS = ('exact', 'nso', 'ucb')
EVALUATION_MODES = ('exact', 'rollout')
DEFAULT_STATE_CAP = 5000000
DEFAULT_BIN_WIDTH = 0.05
DEFAULT_EPISODES = 5000


@dataclass(frozen=True)
class InfiniteSettings:
    """Value-iteration settings used by ``solve --horizon infinite``."""

    gamma: float = 0.9
    epsilon: float = 1e-6
    max_iterations: int = 10000
    backend: str = 'exact'
    universe_depth: int = 2
    outer: int = 200
    inner: int = 200


@dataclass(frozen=True)
class ExperimentConfig:
    """
    A validated experiment.

    Attributes:
        name (str): Experiment name
        environment_kind (str): ``inventory`` or ``maze``
        environment (InventoryConfig or MazeConfig): Environment parameters
        family (ParametricFamily): Randomness model
        true_theta (float): Parameter generating the data
        prior: Prior belief before any data
        formulations (tuple): Subset of ``mean``, ``var``, ``cvar``, ``empirical``
        alpha (float or None): Level of VaR and CVaR
        solver (str): ``exact``, ``nso`` or ``ucb`` (BR-MDP formulations)
        budget (SamplingBudget): Budgets of the sampling solvers
        solver_options (dict): Extra solver options (``paths``, ``beliefs_per_stage``)
        data_sizes (tuple): Dataset sizes H
        replications (int): Replications J per (formulation, H)
        seed (int): Experiment seed
        evaluation (str): ``exact`` or ``rollout``
        episodes (int): Rollout episodes
        posterior_grid (float or None): Quantization grid override
        state_cap (int): Augmented-state cap of exact DP
        histogram_bin_width (float): Histogram bin width
        threads (int): Worker processes
        output (str or None): Output directory
        infinite (InfiniteSettings): Value-iteration settings
    """

    name: str
    environment_kind: str
    environment: object
    family: object
    true_theta: float
    prior: object
    formulations: tuple
    alpha: float
    solver: str
    budget: SamplingBudget
    data_sizes: tuple
    replications: int
    seed: int
    solver_options: dict = field(default_factory=dict)
    evaluation: str = 'exact'
    episodes: int = DEFAULT_EPISODES
    posterior_grid: float = None
    state_cap: int = DEFAULT_STATE_CAP
    histogram_bin_width: float = DEFAULT_BIN_WIDTH
    threads: int = 1
    output: str = None
    infinite: InfiniteSettings = field(default_factory=InfiniteSettings)

    @property
    def space(self):
        return self.family.space

    def build_environment(self, horizon=None, gamma=None):
        """
        Build the environment, optionally overriding horizon and discount.

        Returns:
            Environment: The environment
        """
        settings = self.environment
        overrides = {}
        if horizon is not None:
            overrides['horizon'] = horizon
        if gamma is not None:
            overrides['gamma'] = gamma
        try:
            settings = replace(settings, **overrides)
            if self.environment_kind == 'inventory':
                return build_inventory(settings, self.family)
            return build_maze(settings, self.family)
        except BRMDPError:
            raise
        except ValueError as e:
            raise ConfigurationError("invalid environment: %s" % e)

    def risk(self, formulation):
        """Risk functional of a BR-MDP formulation (``empirical`` solves with the expectation)."""
        if formulation == 'empirical':
            return make_risk('mean')
        return make_risk(formulation, self.alpha)


class ConfigParser:
    """
    Class for loading and validating JSON experiment configurations.

    Unknown keys and invalid values raise :class:`ConfigurationError` naming
    the offending key.
    """

    def parse(self, source):
        """
        Parse a configuration.

        Args:
            source (str or dict): Path to a JSON file, or the loaded mapping

        Returns:
            ExperimentConfig: The validated configuration

        Raises:
            ConfigurationError: If the file cannot be read or the content is invalid
        """
        raw = read_json(source)
        unknown = sorted(set(raw) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
        if unknown:
            raise ConfigurationError("unknown configuration key: %s" % ", ".join(unknown))
        missing = [key for key in REQUIRED_KEYS if key not in raw]
        if missing:
            raise ConfigurationError("missing configuration key: %s" % ", ".join(missing))
        return self._build(raw)

    def _build(self, raw):
        environment_kind, environment = self._environment(raw[KEY_ENVIRONMENT])
        space = self._space(raw[KEY_SPACE])
        family = self._family(raw[KEY_FAMILY], space)
        true_theta = _number(raw, KEY_TRUE_THETA)
        try:
            family.check_theta(true_theta)
        except BRMDPError:
            raise ConfigurationError("%s=%r is outside the parameter space" % (KEY_TRUE_THETA, true_theta))
        formulations = tuple(raw[KEY_FORMULATIONS])
        if not formulations or any(f not in FORMULATIONS for f in formulations):
            raise ConfigurationError("%s must be a non-empty subset of %s" % (KEY_FORMULATIONS, ", ".join(FORMULATIONS)))
        alpha = raw.get(KEY_ALPHA)
        if any(f in ('var', 'cvar') for f in formulations) and (alpha is None or not 0 < alpha < 1):
            raise ConfigurationError("%s must lie in (0, 1) for var and cvar formulations" % KEY_ALPHA)
        solver, budget, options = self._solver(raw[KEY_SOLVER])
        data_sizes = tuple(raw[KEY_DATA_SIZES])
        if not data_sizes or any(not isinstance(h, int) or h < 0 for h in data_sizes):
            raise ConfigurationError("%s must list non-negative integers" % KEY_DATA_SIZES)
        replications = raw[KEY_REPLICATIONS]
        if not isinstance(replications, int) or replications < 1:
            raise ConfigurationError("%s must be a positive integer" % KEY_REPLICATIONS)
        seed = raw[KEY_SEED]
        if not isinstance(seed, int) or seed < 0:
            raise ConfigurationError("%s must be a non-negative integer" % KEY_SEED)
        evaluation, episodes = self._evaluation(raw.get(KEY_EVALUATION, {'mode': 'exact'}))
        bin_width = raw.get(KEY_BIN_WIDTH, DEFAULT_BIN_WIDTH)
        if not bin_width > 0:
            raise ConfigurationError("%s must be positive" % KEY_BIN_WIDTH)
        threads = raw.get(KEY_THREADS, 1)
        if not isinstance(threads, int) or threads < 1:
            raise ConfigurationError("%s must be a positive integer" % KEY_THREADS)
        grid = raw.get(KEY_GRID)
        if grid is not None and not grid > 0:
            raise ConfigurationError("%s must be positive" % KEY_GRID)
        state_cap = raw.get(KEY_STATE_CAP, DEFAULT_STATE_CAP)
        if not isinstance(state_cap, int) or state_cap < 1:
            raise ConfigurationError("%s must be a positive integer" % KEY_STATE_CAP)
        try:
            infinite = InfiniteSettings(**raw.get(KEY_INFINITE, {}))
        except TypeError as e:
            raise ConfigurationError("invalid %s block: %s" % (KEY_INFINITE, e))
        return ExperimentConfig(
            name=str(raw[KEY_NAME]),
            environment_kind=environment_kind,
            environment=environment,
            family=family,
            true_theta=true_theta,
            prior=self._prior(raw[KEY_PRIOR], family, space),
            formulations=formulations,
            alpha=alpha,
            solver=solver,
            budget=budget,
            solver_options=options,
            data_sizes=data_sizes,
            replications=replications,
            seed=seed,
            evaluation=evaluation,
            episodes=episodes,
            posterior_grid=grid,
            state_cap=state_cap,
            histogram_bin_width=float(bin_width),
            threads=threads,
            output=raw.get(KEY_OUTPUT),
            infinite=infinite,
        )

    def _environment(self, block):
        if not isinstance(block, dict) or len(block) != 1:
            raise ConfigurationError("%s must hold exactly one of inventory, maze" % KEY_ENVIRONMENT)
        (kind, params), = block.items()
        settings_class = {'inventory': InventoryConfig, 'maze': MazeConfig}.get(kind)
        if settings_class is None:
            raise ConfigurationError("unknown environment %r" % (kind,))
        params = dict(params)
        for cell_key in ('start', 'exit'):
            if cell_key in params:
                params[cell_key] = tuple(params[cell_key])
        if 'shaky' in params:
            params['shaky'] = tuple(tuple(cell) for cell in params['shaky'])
        if params.get('horizon') in ('inf', 'infinite'):
            params['horizon'] = math.inf
        try:
            return kind, settings_class(**params)
        except TypeError as e:
            raise ConfigurationError("invalid %s block: %s" % (kind, e))

    def _space(self, block):
        try:
            if 'atoms' in block:
                return ParameterSpace.finite(block['atoms'])
            return ParameterSpace.continuous(block['lower'], block.get('upper'))
        except (KeyError, TypeError, BRMDPError) as e:
            raise ConfigurationError("invalid %s: %s" % (KEY_SPACE, e))

    def _family(self, block, space):
        params = dict(block)
        kind = params.pop('kind', None)
        try:
            return make_family(kind, space, **params)
        except TypeError as e:
            raise ConfigurationError("invalid %s parameters: %s" % (KEY_FAMILY, e))
        except BRMDPError as e:
            raise ConfigurationError("invalid %s: %s" % (KEY_FAMILY, e))

    def _prior(self, block, family, space):
        kind = block.get('kind')
        try:
            if kind == 'uniform':
                self._require_finite(space)
                return FinitePosterior.uniform(space.atoms)
            if kind == 'weights':
                self._require_finite(space)
                return FinitePosterior(space.atoms, block['weights'])
            if kind == 'normal':
                if not hasattr(family, 'stddev'):
                    raise ConfigurationError("a normal prior needs the truncated-normal family")
                return NormalMeanPosterior(block['mean'], block['variance'], family.stddev,
                                           lower=space.lower, upper=space.upper)
        except KeyError as e:
            raise ConfigurationError("%s block is missing %s" % (KEY_PRIOR, e))
        except ConfigurationError:
            raise
        except BRMDPError as e:
            raise ConfigurationError("invalid %s: %s" % (KEY_PRIOR, e))
        raise ConfigurationError("unknown %s kind %r (expected uniform, weights or normal)" % (KEY_PRIOR, kind))

    @staticmethod
    def _require_finite(space):
        if not space.is_finite:
            raise ConfigurationError("a finite prior needs a finite parameter space")

    def _solver(self, block):
        params = dict(block)
        kind = params.pop('kind', None)
        if kind not in SOLVERS:
            raise ConfigurationError("unknown %s %r (expected one of %s)" % (KEY_SOLVER, kind, ", ".join(SOLVERS)))
        options = {}
        for name in ('paths', 'beliefs_per_stage'):
            if name in params:
                options[name] = params.pop(name)
        try:
            budget = SamplingBudget(outer=params.pop('outer', None), inner=params.pop('inner', None),
                                    per_stage=tuple(params.pop('per_stage', ())))
        except TypeError as e:
            raise ConfigurationError("invalid %s budget: %s" % (KEY_SOLVER, e))
        if params:
            raise ConfigurationError("unknown %s key: %s" % (KEY_SOLVER, ", ".join(sorted(params))))
        if kind == 'nso':
            budget.require_nested()
        if kind == 'ucb':
            budget.stage_total(0)
        return kind, budget, options

    def _evaluation(self, block):
        mode = block.get('mode', 'exact')
        if mode not in EVALUATION_MODES:
            raise ConfigurationError("unknown evaluation mode %r" % (mode,))
        episodes = block.get('episodes', DEFAULT_EPISODES)
        if not isinstance(episodes, int) or episodes < 1:
            raise ConfigurationError("evaluation episodes must be a positive integer")
        return mode, episodes


def read_json(source):
    """
    Load a JSON object from a path, or deep-copy an already-loaded dict.

    Raises:
        ConfigurationError: If the file is missing, not JSON or not an object
    """
    if isinstance(source, dict):
        raw = copy.deepcopy(source)
    else:
        logging.info("Loading configuration from: %s", source)
        try:
            with open(source, 'r') as f:
                raw = json.load(f)
        except FileNotFoundError:
            raise ConfigurationError("configuration file not found: %s" % source)
        except json.JSONDecodeError as e:
            raise ConfigurationError("configuration file %s is not valid JSON: %s" % (source, e))
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a JSON object")
    return raw


def _number(raw, key):
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError("%s must be a number" % key)
    return float(value)


PRESETS = {
    'inventory': {
        'name': 'inventory',
        'environment': {'inventory': {'capacity': 3, 'horizon': 7, 'initial_level': 1,
                                      'holding': 4.0, 'penalty': 4.0, 'order': 1.0, 'gamma': 1.0}},
        'family': {'kind': 'poisson'},
        'parameter_space': {'atoms': [1.2, 1.6, 2.0, 2.4, 2.8]},
        'true_theta': 2.0,
        'prior': {'kind': 'uniform'},
        'formulations': ['mean', 'var', 'cvar', 'empirical'],
        'alpha': 0.8,
        'solver': {'kind': 'exact'},
        'data_sizes': [10, 20, 100, 1000],
        'replications': 100,
        'seed': 20240501,
        'evaluation': {'mode': 'exact'},
        'infinite': {'gamma': 0.9, 'universe_depth': 2},
    },
    'maze-finite': {
        'name': 'maze-finite',
        'environment': {'maze': {'horizon': 40, 'gamma': 1.0, 'variant': 'uncertain-transition'}},
        'family': {'kind': 'geometric'},
        'parameter_space': {'atoms': [1 / 5.5, 1 / 5.0, 1 / 4.5]},
        'true_theta': 1 / 5.5,
        'prior': {'kind': 'uniform'},
        'formulations': ['mean', 'var', 'cvar', 'empirical'],
        'alpha': 0.6,
        'solver': {'kind': 'exact'},
        'data_sizes': [10, 20, 100, 1000],
        'replications': 100,
        'seed': 20240502,
        'evaluation': {'mode': 'exact'},
        'infinite': {'gamma': 0.9, 'universe_depth': 1},
    },
    'maze-continuous': {
        'name': 'maze-continuous',
        'environment': {'maze': {'horizon': 40, 'gamma': 1.0, 'variant': 'uncertain-cost'}},
        'family': {'kind': 'truncated-normal', 'stddev': 2.0, 'lower': 1.0},
        'parameter_space': {'lower': 1.0},
        'true_theta': 5.5,
        'prior': {'kind': 'normal', 'mean': 0.0, 'variance': 1e6},
        'formulations': ['mean', 'var', 'cvar', 'empirical'],
        'alpha': 0.6,
        'solver': {'kind': 'nso', 'outer': 50, 'inner': 50, 'paths': 200, 'beliefs_per_stage': 20},
        'data_sizes': [10],
        'replications': 100,
        'seed': 20240503,
        'evaluation': {'mode': 'rollout', 'episodes': 5000},
    },
}


def builtin_config(name):
    """
    Return a copy of a shipped preset as a plain dict.

    Raises:
        ConfigurationError: If no preset has that name
    """
    if name not in PRESETS:
        raise ConfigurationError("unknown preset %r (expected one of %s)" % (name, ", ".join(sorted(PRESETS))))
    return copy.deepcopy(PRESETS[name])


def load_config(source):
    """
    Load and validate an experiment configuration.

    Args:
        source (str or dict): Path to a JSON file, or the loaded mapping

    Returns:
        ExperimentConfig: The validated configuration
    """
    return ConfigParser().parse(source)


BANDIT_KEYS = ('machines', 'weights', 'risk', 'alpha', 'checkpoints', 'runs', 'seed', 'output')


@dataclass(frozen=True)
class BanditConfig:
    """
    A validated regret simulation.

    Attributes:
        instance (BanditInstance): Machines, scenario weights and risk functional
        checkpoints (tuple): Play counts reported on the regret curve
        runs (int): Independent runs averaged per checkpoint
        seed (int): Simulation seed
        output (str or None): Output directory
    """

    instance: BanditInstance
    checkpoints: tuple
    runs: int
    seed: int
    output: str = None


def load_bandit_config(source):
    """
    Load a regret simulation from JSON.

    ``machines`` lists, per machine, one cost entry per scenario such as
    ``{"bernoulli": {"mean": 0.1}}``.

    Args:
        source (str or dict): Path to a JSON file, or the loaded mapping

    Returns:
        BanditConfig: The validated configuration

    Raises:
        ConfigurationError: If the content is invalid
    """
    raw = read_json(source)
    unknown = sorted(set(raw) - set(BANDIT_KEYS))
    if unknown:
        raise ConfigurationError("unknown bandit configuration key: %s" % ", ".join(unknown))
    for key in ('machines', 'checkpoints'):
        if not raw.get(key):
            raise ConfigurationError("bandit configuration needs a non-empty %s list" % key)
    try:
        rho = make_risk(raw.get('risk', 'expectation'), raw.get('alpha'))
    except BRMDPError as e:
        raise ConfigurationError("invalid bandit risk: %s" % e)
    costs = [[make_cost(entry) for entry in machine] for machine in raw['machines']]
    instance = BanditInstance(costs, raw.get('weights'), rho)
    checkpoints = tuple(raw['checkpoints'])
    if any(not isinstance(n, int) or n < instance.machines for n in checkpoints):
        raise ConfigurationError("checkpoints must be integers of at least %d plays" % instance.machines)
    runs = raw.get('runs', 100)
    seed = raw.get('seed', 0)
    if not isinstance(runs, int) or runs < 1:
        raise ConfigurationError("runs must be a positive integer")
    if not isinstance(seed, int) or seed < 0:
        raise ConfigurationError("seed must be a non-negative integer")
    return BanditConfig(instance, checkpoints, runs, seed, raw.get('output'))
