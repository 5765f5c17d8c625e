"""
Experiment harness: replications, true-performance evaluation and summaries.

Each replication draws a dataset of size H from the true parameter, builds a
policy for one formulation (a BR-MDP under the expectation, VaR or CVaR, or
the empirical MDP at the maximum-likelihood estimate) and measures the
policy's expected total cost under the true parameter. Replications are
independent and keyed by ``(seed, H, j)``, so they may run in any order and on
any number of worker processes.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import rng as streams
from .callbacks import LoggingCallback
from .errors import BRMDPError, DomainError, ImpossibleObservationError
from .finite import exact_dp, fixed_outcome, solve
from .posterior import FinitePosterior
from .risk import RiskFunctional

EMPIRICAL = 'empirical'
EXACT_EVALUATION = 'exact'
ROLLOUT_EVALUATION = 'rollout'
# Discounted rollouts of infinite-horizon policies stop once gamma^t falls below this.
DISCOUNT_CUTOFF = 1e-10


@dataclass(frozen=True)
class ReplicationResult:
    """
    Outcome of one replication.

    Attributes:
        formulation (str): Formulation label
        data_size (int): Dataset size H
        replication (int): Replication index j
        value (float): True performance of the solved policy, NaN on failure
        stderr (float): Standard error of a rollout estimate, 0 for exact evaluation
        seconds (float): Solve and evaluation time
        error (str): Failure message, empty on success
    """

    formulation: str
    data_size: int
    replication: int
    value: float
    stderr: float = 0.0
    seconds: float = 0.0
    error: str = ''


@dataclass(frozen=True)
class SummaryRow:
    """Aggregate of the successful replications of one (formulation, H) pair."""

    formulation: str
    data_size: int
    average: float
    std: float
    deviation: float
    replications: int
    failures: int
    optimum: float


@dataclass(frozen=True)
class Performance:
    value: float
    stderr: float = 0.0


def mle(family, data, space=None):
    """
    Maximum-likelihood estimate of the parameter from i.i.d. data.

    Finite spaces take the atom of largest total log-likelihood, ties going
    to the smallest atom. Continuous spaces use the closed form of the
    family where one exists and a bounded scalar search otherwise; the
    estimate is clamped into the parameter space.

    Args:
        family (ParametricFamily): Observation model
        data (array-like): Observations

    Returns:
        float: The estimate

    Raises:
        DomainError: If the data is empty or impossible under every atom
    """
    data = np.asarray(data, dtype=float).ravel()
    if data.size == 0:
        raise DomainError("the maximum-likelihood estimate needs at least one observation")
    space = family.space if space is None else space
    if space.is_finite:
        totals = family.log_likelihood(space.atoms, data).sum(axis=0)
        if not np.any(np.isfinite(totals)):
            raise DomainError("the data is impossible under every parameter atom")
        return float(space.atoms[int(np.argmax(totals))])
    if family.name in ('poisson', 'bernoulli'):
        return space.clamp(float(data.mean()))
    if family.name == 'geometric':
        return space.clamp(1.0 / float(data.mean()))
    spread = 20.0 * getattr(family, 'stddev', 1.0)
    low = space.lower if math.isfinite(space.lower) else float(data.min()) - spread
    high = space.upper if math.isfinite(space.upper) else float(data.max()) + spread
    result = minimize_scalar(lambda theta: -float(family.log_likelihood(np.array([theta]), data).sum()),
                             bounds=(low, high), method='bounded', options={'xatol': 1e-8})
    return space.clamp(float(result.x))


class PolicyEvaluator:
    """
    Exact expected total cost of a policy when the parameter is known.

    The policy keeps updating its own belief on every observing transition;
    the recursion follows those beliefs, memoised on ``(stage, state, key)``,
    and integrates observations over the truncated grid of the true
    parameter. Observations the belief deems impossible leave it unchanged.

    Args:
        env (Environment): Finite-horizon environment
        policy (Policy): Policy to evaluate
        theta (float): True parameter
    """

    def __init__(self, env, policy, theta):
        env.family.check_theta(theta)
        self.env = env
        self.policy = policy
        self.grid = policy.table.grid
        xi, probs = env.family.integration_grid(np.array([float(theta)]))
        keep = probs[:, 0] > 0
        self.xi = xi[keep]
        self.probs = probs[keep, 0]
        self._memo = {}

    def evaluate(self):
        return self.value(0, self.policy.root_state, self.policy.root_belief)

    def value(self, stage, state, belief):
        env = self.env
        if stage >= env.horizon:
            return 0.0
        memo_key = (stage, state, belief.key(self.grid))
        if memo_key in self._memo:
            return self._memo[memo_key]
        action = self.policy.act(stage, state, belief)
        if not env.observes(state, action):
            next_state, cost = fixed_outcome(env, state, action)
            total = cost + env.gamma * self.value(stage + 1, next_state, belief)
        else:
            next_states = env.next_state(state, action, self.xi)
            totals = env.cost(state, action, self.xi)
            if stage + 1 < env.horizon:
                batch = belief.update_batch(env.family, self.xi)
                continuation = np.array([
                    self.value(stage + 1, int(s), batch.posterior(i) if batch.valid[i] else belief)
                    for i, s in enumerate(next_states)])
                totals = totals + env.gamma * continuation
            total = float(self.probs @ totals)
        self._memo[memo_key] = total
        return total


def _rollout(env, policy, theta, rng):
    steps = env.horizon if env.finite_horizon else int(math.ceil(math.log(DISCOUNT_CUTOFF) / math.log(env.gamma)))
    state, belief = policy.root_state, policy.root_belief
    total, discount = 0.0, 1.0
    for stage in range(steps):
        action = policy.act(stage, state, belief)
        xi = np.array([float(env.family.draw(np.array(theta), rng, ()))])
        total += discount * float(env.cost(state, action, xi)[0])
        if env.observes(state, action):
            try:
                belief = belief.update(env.family, xi[0])
            except ImpossibleObservationError:
                pass
        state = int(env.next_state(state, action, xi)[0])
        discount *= env.gamma
    return total


def evaluate_true_performance(env, policy, theta, mode=EXACT_EVALUATION, episodes=5000, seed=0):
    """
    Expected total cost of ``policy`` under the true parameter ``theta``.

    Args:
        env (Environment): Environment
        policy (Policy): Policy to evaluate
        theta (float): True parameter
        mode (str): ``exact`` (finite horizon only) or ``rollout``
        episodes (int): Rollouts of the ``rollout`` mode
        seed (int): Seed of the rollout streams ``(seed, EVALUATE, m)``

    Returns:
        Performance: Value and its standard error (0 in exact mode)

    Raises:
        DomainError: If ``theta`` is outside the parameter space or the mode is unknown
    """
    if mode == EXACT_EVALUATION and env.finite_horizon:
        return Performance(PolicyEvaluator(env, policy, theta).evaluate())
    if mode not in (EXACT_EVALUATION, ROLLOUT_EVALUATION):
        raise DomainError("unknown evaluation mode %r" % (mode,))
    env.family.check_theta(theta)
    totals = np.array([_rollout(env, policy, theta, streams.stream(seed, streams.EVALUATE, m))
                       for m in range(episodes)])
    stderr = float(totals.std(ddof=1) / math.sqrt(episodes)) if episodes > 1 else 0.0
    return Performance(float(totals.mean()), stderr)


def optimal_value(config):
    """
    Optimal expected total cost V* when the true parameter is known.

    Returns:
        tuple: ``(value, policy)``
    """
    env = config.build_environment()
    prior = FinitePosterior.point_mass(config.true_theta)
    table, policy = exact_dp(env, prior, RiskFunctional.expectation(), state_cap=config.state_cap)
    return policy.root_value(), policy


def replication_seed(config, data_size, replication):
    """Seed shared by the solve and evaluation streams of one replication."""
    return streams.fold_key((config.seed, data_size, replication))


def draw_data(config, data_size, replication):
    """Dataset of replication ``j`` at size H, from the stream ``(seed, DATA, H, j)``."""
    rng = streams.stream(config.seed, streams.DATA, data_size, replication)
    return np.atleast_1d(config.family.draw(np.array(config.true_theta), rng, (data_size,)))


def build_policy(config, env, formulation, data, seed):
    """
    Solve one formulation on one dataset.

    Returns:
        Policy: The solved policy
    """
    if formulation == EMPIRICAL:
        prior = FinitePosterior.point_mass(mle(config.family, data))
        return exact_dp(env, prior, RiskFunctional.expectation(), state_cap=config.state_cap)[1]
    posterior = config.prior.init_from_data(config.family, data)
    return solve(env, posterior, config.risk(formulation), solver=config.solver, budget=config.budget,
                 seed=seed, grid=config.posterior_grid, state_cap=config.state_cap, **config.solver_options)


def run_replication(task):
    """
    Run one replication; top-level so worker processes can pickle it.

    Args:
        task (tuple): ``(config, formulation, data_size, replication)``

    Returns:
        ReplicationResult: The outcome; solver and evaluation errors are recorded, not raised
    """
    config, formulation, data_size, replication = task
    started = time.perf_counter()
    seed = replication_seed(config, data_size, replication)
    try:
        env = config.build_environment()
        data = draw_data(config, data_size, replication)
        policy = build_policy(config, env, formulation, data, seed)
        performance = evaluate_true_performance(env, policy, config.true_theta, config.evaluation,
                                                config.episodes, seed)
    except BRMDPError as e:
        return ReplicationResult(formulation, data_size, replication, math.nan,
                                 seconds=time.perf_counter() - started, error=str(e))
    except Exception as e:
        logging.exception("Replication %s H=%d j=%d failed", formulation, data_size, replication)
        return ReplicationResult(formulation, data_size, replication, math.nan,
                                 seconds=time.perf_counter() - started, error="%s: %s" % (type(e).__name__, e))
    return ReplicationResult(formulation, data_size, replication, performance.value, performance.stderr,
                             time.perf_counter() - started)


def summarize(results, optimum, formulations):
    """
    Aggregate replications per (formulation, H).

    The deviation is ``mean(((v - V*) / V*)^2)`` over successful replications
    and the standard deviation is the population one.

    Args:
        results (list): Replication results
        optimum (float): V*
        formulations (list): Output order of the formulations

    Returns:
        list: :class:`SummaryRow` per pair, by formulation order then H
    """
    groups = {}
    for result in results:
        groups.setdefault((result.formulation, result.data_size), []).append(result)
    order = {name: i for i, name in enumerate(formulations)}
    rows = []
    for (formulation, data_size) in sorted(groups, key=lambda k: (order.get(k[0], len(order)), k[1])):
        group = groups[(formulation, data_size)]
        values = np.array([r.value for r in group if not r.error])
        failures = len(group) - values.size
        if values.size:
            average = float(values.mean())
            std = float(values.std())
            deviation = float(np.mean(((values - optimum) / optimum) ** 2)) if optimum != 0 else math.nan
        else:
            average = std = deviation = math.nan
        rows.append(SummaryRow(formulation, data_size, average, std, deviation, int(values.size), failures, optimum))
    return rows


def run_experiment(config, threads=None, callback=None):
    """
    Run every replication of every (formulation, H) pair.

    Args:
        config (ExperimentConfig): The experiment
        threads (int, optional): Worker processes, ``config.threads`` by default
        callback (ExperimentCallback, optional): Progress callback

    Returns:
        tuple: ``(results, rows)``; results are ordered by
        formulation, H and replication whatever the worker count
    """
    callback = callback or LoggingCallback()
    threads = config.threads if threads is None else threads
    optimum, _ = optimal_value(config)
    logging.info("Experiment %s: optimal value V* = %.10g", config.name, optimum)
    tasks = [(config, formulation, data_size, j)
             for formulation in config.formulations
             for data_size in config.data_sizes
             for j in range(config.replications)]
    logging.info("Running %d replications on %d worker(s)", len(tasks), threads)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_replication, tasks, chunksize=max(1, len(tasks) // (4 * threads))))
    else:
        results = [run_replication(task) for task in tasks]
    order = {name: i for i, name in enumerate(config.formulations)}
    results.sort(key=lambda r: (order[r.formulation], r.data_size, r.replication))
    for result in results:
        callback.on_replication_complete(result)
    rows = summarize(results, optimum, config.formulations)
    callback.on_experiment_complete(results, rows)
    return results, rows
