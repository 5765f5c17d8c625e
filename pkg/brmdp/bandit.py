"""
Risk-adjusted multi-armed bandit.

Each of L machines has k scenarios; playing a machine reveals one cost per
scenario. The risk-adjusted value of a machine is the risk functional applied
across its per-scenario mean costs, and the UCB rule plays the machine whose
estimated value minus ``sqrt(2 ln n / n_j)`` is smallest. With the
expectation this is the engine behind adaptive sampling in the solvers, and
its regret obeys the logarithmic bound of :func:`regret_bound`.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import rng as streams
from .errors import ConfigurationError
from .risk import EXPECTATION, RiskFunctional


@dataclass(frozen=True)
class BernoulliCost:
    """Cost 1 with probability ``mean``, else 0."""

    mean: float

    def __post_init__(self):
        if not 0 <= self.mean <= 1:
            raise ConfigurationError("Bernoulli cost mean must lie in [0, 1], got %r" % (self.mean,))

    def sample(self, rng, size):
        return (rng.random(size) < self.mean).astype(float)


@dataclass(frozen=True)
class UniformCost:
    """Cost uniform on ``[low, high]`` inside ``[0, 1]``."""

    low: float
    high: float

    def __post_init__(self):
        if not 0 <= self.low <= self.high <= 1:
            raise ConfigurationError("uniform cost needs 0 <= low <= high <= 1, got %r, %r" % (self.low, self.high))

    @property
    def mean(self):
        return (self.low + self.high) / 2.0

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size)


@dataclass(frozen=True)
class DiscreteCost:
    """Cost taking ``values`` (inside ``[0, 1]``) with probabilities ``probs``."""

    values: tuple
    probs: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if values.shape != probs.shape or values.size == 0:
            raise ConfigurationError("discrete cost needs matching non-empty values and probs")
        if np.any(values < 0) or np.any(values > 1):
            raise ConfigurationError("discrete cost values must lie in [0, 1]")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ConfigurationError("discrete cost probabilities must sum to one")
        object.__setattr__(self, "values", tuple(values.tolist()))
        object.__setattr__(self, "probs", tuple(probs.tolist()))

    @property
    def mean(self):
        return float(np.dot(self.values, self.probs))

    def sample(self, rng, size):
        return np.asarray(self.values)[rng.choice(len(self.values), size=size, p=self.probs)]


COST_KINDS = {"bernoulli": BernoulliCost, "uniform": UniformCost, "discrete": DiscreteCost}


def make_cost(spec):
    """
    Build a cost sampler from a config entry such as ``{"bernoulli": {"mean": 0.1}}``.

    Raises:
        ConfigurationError: If the entry is malformed
    """
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigurationError("cost entry must name exactly one kind: %r" % (spec,))
    (kind, params), = spec.items()
    if kind not in COST_KINDS:
        raise ConfigurationError("unknown cost kind %r (expected one of %s)" % (kind, ", ".join(sorted(COST_KINDS))))
    try:
        return COST_KINDS[kind](**params)
    except TypeError as exc:
        raise ConfigurationError("bad parameters for %s cost: %s" % (kind, exc))


class BanditInstance:
    """
    L machines by k scenarios.

    Args:
        costs (list): ``costs[i][j]`` samples the cost of scenario j on machine i
        weights (array-like, optional): Scenario probabilities, uniform by default
        rho (RiskFunctional, optional): Risk functional across scenarios,
            the expectation by default

    Attributes:
        means (numpy.ndarray): True mean costs, shape (L, k)
        values (numpy.ndarray): Risk-adjusted true values v_i
        gaps (numpy.ndarray): Optimality gaps v_i - v*
    """

    def __init__(self, costs, weights=None, rho=None):
        if not costs or not costs[0]:
            raise ConfigurationError("a bandit needs at least one machine and one scenario")
        if any(len(row) != len(costs[0]) for row in costs):
            raise ConfigurationError("every machine needs the same number of scenarios")
        self.costs = [list(row) for row in costs]
        self.rho = rho or RiskFunctional.expectation()
        self.weights = None if weights is None else np.asarray(weights, dtype=float)
        self.means = np.array([[c.mean for c in row] for row in self.costs])
        self.values = np.atleast_1d(self.rho.apply(self.means, self.weights))
        self.best = float(self.values.min())
        self.gaps = self.values - self.best

    @property
    def machines(self):
        return len(self.costs)

    @property
    def scenarios(self):
        return len(self.costs[0])

    @property
    def guaranteed(self):
        """Whether the regret bound applies (expectation only)."""
        return self.rho.kind == EXPECTATION

    def draw(self, machine, rng, size):
        """Costs of ``size`` plays of ``machine``, shape (size, k)."""
        return np.column_stack([cost.sample(rng, size) for cost in self.costs[machine]])

    def scaled(self, factor):
        """The instance with every cost multiplied by ``factor``, drawing from the same streams."""
        rows = [[_ScaledCost(cost, float(factor)) for cost in row] for row in self.costs]
        return BanditInstance(rows, self.weights, self.rho)


@dataclass(frozen=True)
class _ScaledCost:
    base: object
    factor: float

    @property
    def mean(self):
        return self.base.mean * self.factor

    def sample(self, rng, size):
        return self.base.sample(rng, size) * self.factor


class RegretLedger:
    """
    Play counts and per-scenario cost sums of one UCB run.

    Attributes:
        counts (numpy.ndarray): Plays T_i(n) per machine
        sums (numpy.ndarray): Cost sums per (machine, scenario)
        gaps (numpy.ndarray or None): Optimality gaps, when the truth is known
        values (numpy.ndarray or None): Risk-adjusted true values v_i
    """

    def __init__(self, machines, scenarios, gaps=None, values=None):
        self.counts = np.zeros(machines, dtype=np.int64)
        self.sums = np.zeros((machines, scenarios))
        self.gaps = gaps
        self.values = values

    @property
    def plays(self):
        return int(self.counts.sum())

    def record(self, machine, costs):
        self.counts[machine] += 1
        self.sums[machine] += costs

    def averages(self):
        return self.sums / np.maximum(self.counts, 1)[:, None]


def play_ucb(instance, plays, seed, run=0):
    """
    Run the UCB rule for ``plays`` plays.

    Machine i draws its costs from the stream ``(seed, BANDIT, run, i)``;
    its t-th play uses the t-th draw, so runs are reproducible and coupled
    across instances that share a seed.

    Args:
        instance (BanditInstance): The bandit
        plays (int): Total plays n
        seed (int): Experiment seed
        run (int): Run index

    Returns:
        tuple: ``(history, ledger)``; history lists the machine of every play

    Raises:
        ConfigurationError: If ``plays`` is below the number of machines
    """
    machines = instance.machines
    if plays < machines:
        raise ConfigurationError("%d plays cannot initialise %d machines" % (plays, machines))
    if not instance.guaranteed:
        logging.warning("UCB with %s carries no regret guarantee", instance.rho)
    draws = [instance.draw(i, streams.stream(seed, streams.BANDIT, run, i), plays) for i in range(machines)]
    ledger = RegretLedger(machines, instance.scenarios, instance.gaps, instance.values)
    history = []
    for machine in range(machines):
        ledger.record(machine, draws[machine][0])
        history.append(machine)
    while len(history) < plays:
        estimates = np.atleast_1d(instance.rho.apply(ledger.averages(), instance.weights))
        bonus = np.sqrt(2.0 * math.log(len(history)) / ledger.counts)
        machine = int(np.argmin(estimates - bonus))
        ledger.record(machine, draws[machine][ledger.counts[machine]])
        history.append(machine)
    return history, ledger


def regret(ledger):
    """
    Realised regret ``sum_i gap_i T_i(n)`` of one run.

    Raises:
        ConfigurationError: If the ledger carries no true gaps
    """
    if ledger.gaps is None:
        raise ConfigurationError("regret needs the true optimality gaps")
    return float(ledger.gaps @ ledger.counts)


def empirical_regret(ledger, instance):
    """
    Risk functional of the realised per-scenario cost totals minus ``n v*``.

    Its expectation equals the expected regret under the expectation.
    """
    totals = ledger.sums.sum(axis=0)
    return float(instance.rho.apply(totals, instance.weights)) - ledger.plays * instance.best


def regret_bound(gaps, plays):
    """
    Logarithmic regret bound ``8 sum_{gap>0} ln n / gap + (1 + pi^2/3) sum gap``.

    Args:
        gaps (array-like): Optimality gaps
        plays (int): Number of plays n

    Returns:
        float: The bound
    """
    gaps = np.asarray(gaps, dtype=float)
    positive = gaps[gaps > 0]
    return float(8.0 * np.sum(math.log(plays) / positive) + (1.0 + math.pi ** 2 / 3.0) * gaps.sum())


def expected_plays_bound(gap, plays):
    """Bound ``8 ln n / gap^2 + 1 + pi^2/3`` on the expected plays of a suboptimal machine."""
    return 8.0 * math.log(plays) / gap ** 2 + 1.0 + math.pi ** 2 / 3.0


def concentration_bound(samples, deviation):
    """Hoeffding bound ``exp(-2 t a^2)`` on a t-sample average of [0, 1] costs exceeding its mean by a."""
    return math.exp(-2.0 * samples * deviation ** 2)


@dataclass(frozen=True)
class RegretPoint:
    plays: int
    mean_regret: float
    stderr: float
    bound: float


def regret_curve(instance, checkpoints, runs, seed):
    """
    Mean realised regret at each checkpoint over independent runs.

    Args:
        instance (BanditInstance): The bandit
        checkpoints (list): Play counts to report, ascending
        runs (int): Number of runs
        seed (int): Experiment seed

    Returns:
        list: :class:`RegretPoint` per checkpoint
    """
    checkpoints = sorted(int(n) for n in checkpoints)
    if runs < 1:
        raise ConfigurationError("regret curves need at least one run")
    samples = np.zeros((runs, len(checkpoints)))
    for run in range(runs):
        history, _ = play_ucb(instance, checkpoints[-1], seed, run)
        history = np.asarray(history)
        for column, plays in enumerate(checkpoints):
            counts = np.bincount(history[:plays], minlength=instance.machines)
            samples[run, column] = instance.gaps @ counts
    stderr = samples.std(axis=0, ddof=1) / math.sqrt(runs) if runs > 1 else np.zeros(len(checkpoints))
    return [RegretPoint(n, float(samples[:, c].mean()), float(stderr[c]), regret_bound(instance.gaps, n))
            for c, n in enumerate(checkpoints)]
