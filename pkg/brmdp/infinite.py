"""
Infinite-horizon BR-MDPs: the risk-adjusted Bellman operator and value iteration.

Beliefs keep sharpening along trajectories, so the operator acts on a finite
universe of augmented states; transitions whose successor belief is not in
the universe are projected onto the nearest stored key of the same physical
state.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import rng as streams
from .errors import ConfigurationError, DomainError
from .finite import fixed_outcome, nso_stage
from .model import DEFAULT_TAIL
from .posterior import FinitePosterior
from .tables import Policy, ValueOracle, ValueTable

EXACT_BACKEND = "exact"
NSO_BACKEND = "nso"
DEFAULT_EPSILON = 1e-6
DEFAULT_MAX_ITERATIONS = 10000


@dataclass
class _Transition:
    """Precomputed one-step data of a universe member under one action."""

    action: int
    cost_mean: np.ndarray
    likelihood: np.ndarray
    successors: np.ndarray


class OperatorContext:
    """
    Everything the Bellman operator needs: environment, risk functional,
    evaluation backend and the augmented-state universe.

    Args:
        env (Environment): Environment with ``gamma < 1``
        rho (RiskFunctional): Risk functional
        universe (list): ``(state, belief)`` pairs; the first is the root
        backend (str): ``exact`` (finite beliefs, exact sums) or ``nso``
        budget (SamplingBudget, optional): Budgets of the ``nso`` backend
        seed (int): Seed of the ``nso`` backend; the same streams are reused at
            every application
        grid (float, optional): Posterior quantization grid
        project (bool): Project out-of-universe successors onto the nearest key
        tail (float): Observation-support truncation of the exact backend

    Raises:
        ConfigurationError: If ``gamma >= 1``, the backend is unknown, or a
            successor leaves the universe while projection is disabled
    """

    def __init__(self, env, rho, universe, backend=EXACT_BACKEND, budget=None, seed=0, grid=None,
                 project=True, tail=DEFAULT_TAIL):
        if not env.gamma < 1:
            raise ConfigurationError("the Bellman operator needs gamma < 1, got %r" % (env.gamma,))
        if backend not in (EXACT_BACKEND, NSO_BACKEND):
            raise ConfigurationError("unknown operator backend %r" % (backend,))
        if not universe:
            raise ConfigurationError("the augmented-state universe is empty")
        self.env = env
        self.rho = rho
        self.backend = backend
        self.budget = budget
        self.seed = seed
        self.project = project
        self.tail = tail
        self.grid = universe[0][1].default_grid if grid is None else grid
        self.universe = [(int(s), b) for s, b in universe]
        self.keys = [b.key(self.grid) for _, b in self.universe]
        self._index = ValueTable(horizon=None, grid=self.grid)
        for u, (state, _) in enumerate(self.universe):
            if self._index.get(0, state, self.keys[u]) is None:
                self._index.store(0, state, self.keys[u], float(u))
        self._grids = {}
        self.cost_bound = self._cost_bound()
        if backend == EXACT_BACKEND:
            self.transitions = [self._precompute(u) for u in range(len(self.universe))]
        elif budget is None:
            raise ConfigurationError("the nso backend needs a sampling budget")
        else:
            budget.require_nested()

    def __len__(self):
        return len(self.universe)

    def _cost_bound(self):
        atoms = [b.atoms for _, b in self.universe if isinstance(b, FinitePosterior)]
        thetas = np.unique(np.concatenate(atoms)) if atoms else None
        return self.env.checked_cost_bound(thetas, self.tail)

    def locate(self, states, batch):
        """
        Universe indices of successor augmented states.

        Raises:
            ConfigurationError: If a successor is outside the universe and
                projection is disabled, or its physical state has no members
        """
        states = np.asarray(states)
        coords = batch.coords(self.grid)
        result = np.zeros(states.shape[0], dtype=np.int64)
        for state in np.unique(states):
            rows = np.flatnonzero(states == state)
            if not self.project:
                keys = batch.keys(self.grid)
                for row in rows:
                    entry = self._index.get(0, int(state), keys[row])
                    if entry is None:
                        raise ConfigurationError("successor (%d, %s) leaves the universe" % (state, keys[row]))
                    result[row] = int(entry[0])
                continue
            try:
                found = self._index.nearest_values(0, int(state), batch.kind, coords[rows])
            except DomainError:
                raise ConfigurationError("no universe member has physical state %d" % state)
            result[rows] = found.astype(np.int64)
        return result

    def _observation_grid(self, atoms):
        key = tuple(atoms.tolist())
        if key not in self._grids:
            self._grids[key] = self.env.family.integration_grid(atoms, self.tail)
        return self._grids[key]

    def _precompute(self, u):
        env = self.env
        state, belief = self.universe[u]
        if not isinstance(belief, FinitePosterior):
            raise ConfigurationError("the exact backend needs finite beliefs")
        xi, probs = self._observation_grid(belief.atoms)
        live = belief.weights > 0
        probs = probs[:, live]
        reachable = probs.sum(axis=1) > 0
        xi, probs = xi[reachable], probs[reachable]
        transitions = []
        for action in env.actions(state):
            if env.observes(state, action):
                successors = self.locate(env.next_state(state, action, xi), belief.update_batch(env.family, xi))
                cost_mean = probs.T @ env.cost(state, action, xi)
                likelihood = probs
            else:
                next_state, cost = fixed_outcome(env, state, action)
                successors = self.locate(np.array([next_state]), belief.repeat(1))
                cost_mean = np.full(probs.shape[1], cost)
                likelihood = np.ones((1, probs.shape[1]))
            transitions.append(_Transition(action, cost_mean, likelihood, successors))
        return belief.weights[live] / belief.weights[live].sum(), transitions

    def q_values(self, u, values):
        """Risk-adjusted Q-values of universe member ``u`` under ``values`` (exact backend)."""
        weights, transitions = self.transitions[u]
        return [(t.action, self.rho.apply(t.cost_mean + self.env.gamma * (t.likelihood.T @ values[t.successors]),
                                          weights))
                for t in transitions]


class _UniverseOracle(ValueOracle):

    def __init__(self, context, values):
        self.context = context
        self.vector = values

    def values(self, states, batch):
        return self.vector[self.context.locate(states, batch)]


def _apply(context, values):
    values = np.asarray(values, dtype=float)
    if values.shape != (len(context),):
        raise ConfigurationError("value vector has shape %s, universe has %d members" % (values.shape, len(context)))
    result = np.empty(len(context))
    actions = np.empty(len(context), dtype=np.int64)
    for u, (state, belief) in enumerate(context.universe):
        if context.backend == EXACT_BACKEND:
            best_value, best_action = math.inf, None
            for action, q_value in context.q_values(u, values):
                if q_value < best_value:
                    best_value, best_action = q_value, action
        else:
            rng = streams.stream(context.seed, streams.SOLVE, u)
            best_value, best_action = nso_stage(context.env, state, belief, context.rho,
                                                _UniverseOracle(context, values), context.budget, rng)
        result[u] = best_value
        actions[u] = best_action
    return result, actions


def bellman_apply(context, values):
    """
    Apply the risk-adjusted Bellman operator once.

    ``(TV)(s, mu) = min_a rho_{theta ~ mu} E_{xi | theta}[C(s, a, xi) + gamma V(s', mu')]``
    on every universe member.

    Args:
        context (OperatorContext): Operator definition
        values (array-like): V on the universe, shape (len(context),)

    Returns:
        numpy.ndarray: TV on the universe
    """
    return _apply(context, values)[0]


@dataclass
class ValueIterationResult:
    """
    Outcome of value iteration.

    Attributes:
        values (numpy.ndarray): Final iterate on the universe
        policy (Policy): Stationary greedy policy
        iterations (int): Operator applications performed
        converged (bool): False when the iteration cap was reached first
        residuals (list): ``||TV - V||`` after each application
    """

    values: np.ndarray
    policy: Policy
    iterations: int
    converged: bool
    residuals: list


def value_iteration(context, initial=None, epsilon=DEFAULT_EPSILON, max_iterations=DEFAULT_MAX_ITERATIONS):
    """
    Iterate ``V <- TV`` until ``||TV - V|| <= epsilon (1 - gamma) / gamma``.

    Args:
        context (OperatorContext): Operator definition
        initial (array-like, optional): Starting values, zero by default
        epsilon (float): Target accuracy of the returned values
        max_iterations (int): Iteration cap

    Returns:
        ValueIterationResult: Final values, the policy greedy for them and
        convergence data

    Raises:
        ConfigurationError: If ``epsilon`` is not positive or ``max_iterations`` is below one
    """
    if not epsilon > 0:
        raise ConfigurationError("epsilon must be positive, got %r" % (epsilon,))
    if max_iterations < 1:
        raise ConfigurationError("max_iterations must be at least 1, got %r" % (max_iterations,))
    gamma = context.env.gamma
    threshold = epsilon * (1 - gamma) / gamma
    values = np.zeros(len(context)) if initial is None else np.array(initial, dtype=float)
    residuals = []
    converged = False
    iterations = 0
    while iterations < max_iterations:
        updated, _ = _apply(context, values)
        iterations += 1
        residuals.append(float(np.max(np.abs(updated - values))))
        values = updated
        if residuals[-1] <= threshold:
            converged = True
            break
    if not converged:
        logging.warning("Value iteration stopped after %d iterations (residual %.3e)", iterations, residuals[-1])
    else:
        logging.debug("Value iteration converged after %d iterations", iterations)
    # Greedy with respect to the returned values, not the previous iterate.
    _, actions = _apply(context, values)
    table = ValueTable(horizon=None, grid=context.grid)
    for u, (state, _) in enumerate(context.universe):
        if table.get(0, state, context.keys[u]) is None:
            table.store(0, state, context.keys[u], values[u], int(actions[u]))
    root_state, root_belief = context.universe[0]
    policy = Policy(context.env, table, root_state, root_belief, name="value-iteration")
    return ValueIterationResult(values, policy, iterations, converged, residuals)


def build_universe(env, prior, depth, grid=None, tail=DEFAULT_TAIL):
    """
    Every physical state paired with every belief reachable from ``prior``
    within ``depth`` updates, updating on each point of the truncated
    observation grid that has positive probability.

    Args:
        env (Environment): Environment
        prior (FinitePosterior): Root belief
        depth (int): Number of updates explored
        grid (float, optional): Posterior quantization grid
        tail (float): Observation-support truncation

    Returns:
        list: ``(state, belief)`` pairs, the root ``(initial_state, prior)`` first
    """
    if not isinstance(prior, FinitePosterior):
        raise ConfigurationError("universes are built from finite beliefs")
    grid = prior.default_grid if grid is None else grid
    xi, probs = env.family.integration_grid(prior.atoms, tail)
    beliefs = {prior.key(grid): prior}
    frontier = [prior]
    for _ in range(depth):
        reached = []
        for belief in frontier:
            live = belief.weights > 0
            points = xi[probs[:, live].sum(axis=1) > 0]
            batch = belief.update_batch(env.family, points)
            for i, key in enumerate(batch.keys(grid)):
                if key is not None and key not in beliefs:
                    beliefs[key] = batch.posterior(i)
                    reached.append(beliefs[key])
        frontier = reached
    universe = [(env.initial_state, prior)]
    for belief in beliefs.values():
        for state in range(env.num_states):
            if not (state == env.initial_state and belief is prior):
                universe.append((state, belief))
    return universe


def contraction_envelope(gamma, iterations, cost_bound, value_norm):
    """Bound ``gamma^k (Z / (1 - gamma) + ||V||)`` on the distance of ``T^k V`` from the fixed point."""
    return gamma ** iterations * (cost_bound / (1 - gamma) + value_norm)
