"""
Finite-horizon BR-MDP solvers.

Three procedures approximate (or compute) the optimal stage values
V_t(s, mu) = min_a rho_{theta ~ mu} E_{xi | theta}[C(s, a, xi) + gamma V_{t+1}(s', mu')]:

* :class:`ExactDynamicProgramming` evaluates the recursion exactly over the
  augmented states reachable from the root, with exact sums over a truncated
  observation grid and the weighted risk functional over posterior atoms.
* :func:`nso_stage` / :func:`nso_solve` estimate it by nested simulation:
  outer posterior draws, inner observation draws.
* :func:`ucb_stage` / :func:`ucb_solve` allocate a per-stage simulation budget
  across actions with an upper-confidence rule (expectation only).

Every random draw comes from a stream keyed by the solve seed and the
augmented state, so results do not depend on evaluation order.
"""

import logging
import math
import time

import numpy as np

from . import rng as streams
from .callbacks import LoggingCallback
from .errors import ConfigurationError, StateLimitError
from .model import DEFAULT_TAIL
from .posterior import FinitePosterior
from .risk import EXPECTATION
from .tables import Policy, TableOracle, ValueOracle, ValueTable

DEFAULT_STATE_CAP = 5000000
PRUNE_SLACK = 1e-9
DEFAULT_PATHS = 200
DEFAULT_BELIEFS_PER_STAGE = 50


class _StageClock:
    """Exclusive time per stage for recursive solvers (children's time is not charged to the parent)."""

    def __init__(self, horizon):
        self.seconds = [0.0] * horizon
        self._stack = []

    def enter(self):
        self._stack.append([time.perf_counter(), 0.0])

    def leave(self, stage):
        started, children = self._stack.pop()
        elapsed = time.perf_counter() - started
        self.seconds[stage] += elapsed - children
        if self._stack:
            self._stack[-1][1] += elapsed


def _report_stages(callback, solver, table, seconds):
    sizes = table.sizes()
    for stage in reversed(range(len(seconds))):
        callback.on_stage_complete(solver, stage, sizes.get(stage, 0), seconds[stage])


def _require_finite_horizon(env):
    if not env.finite_horizon:
        raise ConfigurationError("finite-horizon solvers need a finite horizon, got %r" % (env.horizon,))


def fixed_outcome(env, state, action):
    """Next state and cost of a transition that does not depend on the observation."""
    nominal = np.zeros(1)
    return int(env.next_state(state, action, nominal)[0]), float(env.cost(state, action, nominal)[0])


class ExactDynamicProgramming:
    """
    Exact dynamic programming over the augmented states reachable from a root.

    The recursion runs top-down with memoisation on ``(stage, state, key)``,
    which visits exactly the reachable augmented states. When the environment
    supplies admissible action lower bounds, actions whose bound exceeds the
    best value found so far are skipped; the result is unchanged because
    every supported risk functional dominates the minimum of its inputs.

    Args:
        env (Environment): Finite-horizon environment
        prior (FinitePosterior): Root belief
        rho (RiskFunctional): Risk functional applied over posterior atoms
        grid (float, optional): Posterior quantization grid
        state_cap (int): Maximum number of augmented states
        tail (float): Tail mass tolerated when truncating the observation support
        prune (bool): Use environment lower bounds to skip actions
        callback (SolverCallback, optional): Progress callback
    """

    name = "exact"

    def __init__(self, env, prior, rho, grid=None, state_cap=DEFAULT_STATE_CAP, tail=DEFAULT_TAIL,
                 prune=True, callback=None):
        _require_finite_horizon(env)
        if not isinstance(prior, FinitePosterior):
            raise ConfigurationError("exact dynamic programming needs a finite parameter space")
        self.env = env
        self.prior = prior
        self.rho = rho
        self.grid = prior.default_grid if grid is None else grid
        self.state_cap = int(state_cap)
        self.prune = prune
        self.callback = callback or LoggingCallback()
        self.xi, self.probs = env.family.integration_grid(prior.atoms, tail)
        self.table = ValueTable(env.horizon, self.grid)
        self._clock = _StageClock(env.horizon)

    def solve(self, state=None):
        """
        Solve from the root augmented state.

        Args:
            state (int, optional): Root physical state, the environment's
                initial state by default

        Returns:
            tuple: ``(ValueTable, Policy)``

        Raises:
            StateLimitError: If more than ``state_cap`` augmented states are reachable
        """
        state = self.env.initial_state if state is None else int(state)
        started = time.perf_counter()
        value = self.value(0, state, self.prior)
        elapsed = time.perf_counter() - started
        _report_stages(self.callback, self.name, self.table, self._clock.seconds)
        self.callback.on_solve_complete(self.name, value, elapsed)
        logging.debug("Exact DP: %d augmented states, root value %.10g", len(self.table), value)
        return self.table, Policy(self.env, self.table, state, self.prior, name=self.name)

    def value(self, stage, state, belief, key=None):
        """Optimal value of ``(state, belief)`` at ``stage``, computed on demand."""
        if stage >= self.env.horizon:
            return 0.0
        key = belief.key(self.grid) if key is None else key
        entry = self.table.get(stage, state, key)
        if entry is not None:
            return entry[0]
        if len(self.table) >= self.state_cap:
            raise StateLimitError("exact DP exceeded the cap of %d augmented states" % self.state_cap)
        self._clock.enter()
        value, action = self._bellman(stage, state, belief)
        self._clock.leave(stage)
        self.table.store(stage, state, key, value, action)
        return value

    def oracle(self, stage):
        """A :class:`ValueOracle` returning exact stage values, computed on demand."""
        return _ExactOracle(self, stage)

    def _bellman(self, stage, state, belief):
        env = self.env
        live = belief.weights > 0
        atom_weights = belief.weights[live] / belief.weights[live].sum()
        probs = self.probs[:, live]
        reachable = probs.sum(axis=1) > 0
        xi = self.xi[reachable]
        probs = probs[reachable]
        remaining = env.horizon - stage
        actions = env.actions(state)
        if self.prune:
            bounds = [env.action_lower_bound(remaining, state, a) for a in actions]
        else:
            bounds = [-math.inf] * len(actions)
        best_value, best_action = math.inf, None
        for index in sorted(range(len(actions)), key=lambda i: bounds[i]):
            if bounds[index] > best_value + PRUNE_SLACK:
                break
            action = actions[index]
            per_atom = self._per_atom_q(stage, state, belief, action, xi, probs)
            q_value = self.rho.apply(per_atom, atom_weights)
            if q_value < best_value or (q_value == best_value and action < best_action):
                best_value, best_action = q_value, action
        return best_value, best_action

    def _per_atom_q(self, stage, state, belief, action, xi, probs):
        env = self.env
        if not env.observes(state, action):
            next_state, cost = fixed_outcome(env, state, action)
            q_value = cost + env.gamma * self.value(stage + 1, next_state, belief)
            return np.full(probs.shape[1], q_value)
        next_states = env.next_state(state, action, xi)
        costs = env.cost(state, action, xi)
        continuation = np.zeros(xi.shape[0])
        if stage + 1 < env.horizon:
            batch = belief.update_batch(env.family, xi)
            for i, (next_state, key) in enumerate(zip(next_states, batch.keys(self.grid))):
                entry = self.table.get(stage + 1, int(next_state), key)
                if entry is not None:
                    continuation[i] = entry[0]
                else:
                    continuation[i] = self.value(stage + 1, int(next_state), batch.posterior(i), key)
        return probs.T @ (costs + env.gamma * continuation)


class _ExactOracle(ValueOracle):

    def __init__(self, solver, stage):
        self.solver = solver
        self.stage = stage

    def values(self, states, batch):
        result = np.zeros(len(states))
        if self.stage >= self.solver.env.horizon:
            return result
        keys = batch.keys(self.solver.grid)
        for i, (state, key) in enumerate(zip(states, keys)):
            if key is not None:
                result[i] = self.solver.value(self.stage, int(state), batch.posterior(i), key)
        return result


def exact_dp(env, prior, rho, **options):
    """
    Solve a finite-horizon BR-MDP exactly.

    Args:
        env (Environment): Finite-horizon environment
        prior (FinitePosterior): Root belief
        rho (RiskFunctional): Risk functional
        **options: Passed to :class:`ExactDynamicProgramming`

    Returns:
        tuple: ``(ValueTable, Policy)``
    """
    return ExactDynamicProgramming(env, prior, rho, **options).solve()


def nso_stage(env, state, belief, rho, oracle, budget, rng):
    """
    Nested simulation estimate of one stage value.

    For each action, N parameters are drawn from the belief and K
    observations from each; the K-sample averages of
    ``C + gamma V_next(g, update(mu, xi))`` are fed to the risk functional.
    Transitions that do not observe are evaluated without sampling.

    Args:
        env (Environment): Environment
        state (int): Physical state
        belief: Posterior belief
        rho (RiskFunctional): Risk functional over the N outer averages
        oracle (ValueOracle): Next-stage values
        budget (SamplingBudget): Outer and inner budgets
        rng (numpy.random.Generator): Random stream

    Returns:
        tuple: ``(value, action)``; ties go to the lowest action
    """
    outer, inner = budget.require_nested()
    family = env.family
    best_value, best_action = math.inf, None
    for action in env.actions(state):
        if not env.observes(state, action):
            next_state, cost = fixed_outcome(env, state, action)
            q_value = cost + env.gamma * oracle.values(np.array([next_state]), belief.repeat(1))[0]
        else:
            thetas = belief.sample_thetas(rng, outer)
            xi = family.draw(thetas[:, None], rng, (outer, inner))
            unique, inverse = np.unique(xi, return_inverse=True)
            next_states = env.next_state(state, action, unique)
            totals = env.cost(state, action, unique) + env.gamma * oracle.values(
                next_states, belief.update_batch(family, unique))
            averages = totals[inverse.reshape(outer, inner)].mean(axis=1)
            q_value = rho.apply(averages)
        if q_value < best_value:
            best_value, best_action = q_value, action
    return best_value, best_action


def _even_subsample(items, cap):
    if len(items) <= cap:
        return items
    picks = np.unique(np.rint(np.linspace(0, len(items) - 1, cap)).astype(int))
    return [items[i] for i in picks]


def sample_beliefs(env, prior, seed, paths=DEFAULT_PATHS, cap=DEFAULT_BELIEFS_PER_STAGE, grid=None):
    """
    Beliefs visited per stage by forward simulation under random actions.

    Each path draws its own parameter from the prior and follows uniformly
    random admissible actions. Stage 0 holds the prior alone; later stages
    hold the distinct (by key) beliefs seen, in order of first visit, thinned
    to at most ``cap`` by even subsampling.

    Returns:
        list: One list of beliefs per stage
    """
    grid = prior.default_grid if grid is None else grid
    horizon = env.horizon
    seen = [dict() for _ in range(horizon)]
    seen[0][prior.key(grid)] = prior
    for path in range(paths):
        rng = streams.stream(seed, streams.UNIVERSE, path)
        theta = prior.sample_theta(rng)
        state, belief = env.initial_state, prior
        for stage in range(1, horizon):
            actions = env.actions(state)
            action = actions[int(rng.integers(len(actions)))]
            xi = env.family.draw(np.array(theta), rng, ())
            if env.observes(state, action):
                belief = belief.update(env.family, float(xi))
            state = int(env.next_state(state, action, np.array([float(xi)]))[0])
            seen[stage].setdefault(belief.key(grid), belief)
    return [_even_subsample(list(stage.values()), cap) for stage in seen]


def nso_solve(env, prior, rho, budget, seed, paths=DEFAULT_PATHS, beliefs_per_stage=DEFAULT_BELIEFS_PER_STAGE,
              grid=None, callback=None):
    """
    Nested simulation applied backward over the stages.

    Stage t is solved on every physical state paired with the beliefs
    returned by :func:`sample_beliefs` (the root alone at stage 0), using the
    stage t+1 table as continuation with nearest-key projection.

    Args:
        env (Environment): Finite-horizon environment
        prior: Root belief (finite or normal-mean)
        rho (RiskFunctional): Risk functional
        budget (SamplingBudget): Outer and inner budgets
        seed (int): Solve seed
        paths (int): Forward paths used to collect beliefs
        beliefs_per_stage (int): Cap on beliefs per stage
        grid (float, optional): Posterior quantization grid
        callback (SolverCallback, optional): Progress callback

    Returns:
        Policy: Greedy policy over the stage tables
    """
    _require_finite_horizon(env)
    budget.require_nested()
    callback = callback or LoggingCallback()
    grid = prior.default_grid if grid is None else grid
    started = time.perf_counter()
    beliefs = sample_beliefs(env, prior, seed, paths, beliefs_per_stage, grid)
    table = ValueTable(env.horizon, grid)
    for stage in reversed(range(env.horizon)):
        stage_started = time.perf_counter()
        oracle = TableOracle(table, stage + 1)
        states = [env.initial_state] if stage == 0 else range(env.num_states)
        for belief in beliefs[stage]:
            key = belief.key(grid)
            for state in states:
                rng = streams.stream(seed, streams.SOLVE, stage, state, key.coords)
                value, action = nso_stage(env, state, belief, rho, oracle, budget, rng)
                table.store(stage, state, key, value, action)
        callback.on_stage_complete("nso", stage, table.sizes().get(stage, 0), time.perf_counter() - stage_started)
    policy = Policy(env, table, env.initial_state, prior, name="nso")
    callback.on_solve_complete("nso", policy.root_value(), time.perf_counter() - started)
    return policy


def cost_scale(env, atoms, horizon=None):
    """
    Factor ``1 / (C_max T)`` mapping every stage cost into ``[0, 1/T]``.

    Uses the environment's declared cost bound, checked against a sweep over
    the truncated observation support of ``atoms``.
    """
    bound = env.checked_cost_bound(atoms)
    horizon = env.horizon if horizon is None else horizon
    return 1.0 if bound <= 0 else 1.0 / (bound * horizon)


def ucb_stage(env, state, belief, oracle, total, rng, scale=None):
    """
    Upper-confidence adaptive sampling estimate of one stage value (expectation only).

    Each play of an action draws one observation per posterior atom and
    scores ``sum_j w_j [C + gamma V_next]`` over the atoms. Every action is
    played once; then the action minimising
    ``Q_a - sqrt(2 ln n / N_a)`` is played until ``total`` plays, where ``n``
    counts all plays so far. Costs are scaled by ``scale`` internally.

    Args:
        env (Environment): Environment
        state (int): Physical state
        belief (FinitePosterior): Posterior belief
        oracle (ValueOracle): Next-stage values
        total (int): Total plays N_t
        rng (numpy.random.Generator): Random stream
        scale (float, optional): Cost scaling, :func:`cost_scale` by default

    Returns:
        tuple: ``(value, q_values, counts)`` with
        ``value = sum_a (N_a / N_t) Q_a`` in unscaled units

    Raises:
        ConfigurationError: If the belief is not finite or ``total`` is
            smaller than the number of actions
    """
    if not isinstance(belief, FinitePosterior):
        raise ConfigurationError("adaptive sampling needs a finite parameter space")
    actions = env.actions(state)
    if total < len(actions):
        raise ConfigurationError("budget %d is below the %d admissible actions" % (total, len(actions)))
    if scale is None:
        scale = cost_scale(env, belief.atoms)
    live = belief.weights > 0
    atoms = belief.atoms[live]
    weights = belief.weights[live] / belief.weights[live].sum()
    family = env.family
    caches = [dict() for _ in actions]

    def play(index):
        action = actions[index]
        cache = caches[index]
        if not env.observes(state, action):
            if None not in cache:
                next_state, cost = fixed_outcome(env, state, action)
                cache[None] = cost + env.gamma * oracle.values(np.array([next_state]), belief.repeat(1))[0]
            return scale * cache[None]
        xi = family.draw(atoms, rng, atoms.shape)
        missing = np.unique([x for x in xi if x not in cache])
        if missing.size:
            totals = env.cost(state, action, missing) + env.gamma * oracle.values(
                env.next_state(state, action, missing), belief.update_batch(family, missing))
            cache.update(zip(missing.tolist(), totals.tolist()))
        return scale * float(weights @ np.array([cache[x] for x in xi.tolist()]))

    estimates = np.array([play(i) for i in range(len(actions))])
    counts = np.ones(len(actions), dtype=np.int64)
    plays = len(actions)
    while plays < total:
        index = int(np.argmin(estimates - np.sqrt(2.0 * math.log(plays) / counts)))
        reward = play(index)
        counts[index] += 1
        estimates[index] += (reward - estimates[index]) / counts[index]
        plays += 1
    value = float(counts @ estimates) / total
    return value / scale, estimates / scale, counts


class AdaptiveSampling:
    """
    Adaptive sampling applied backward over the stages, evaluated lazily.

    Stage t values are computed on first request with :func:`ucb_stage`,
    whose continuation queries stage t+1 the same way; results are memoised
    by ``(stage, state, key)``. The greedy action is the argmin of the
    estimated Q-values.

    Args:
        env (Environment): Finite-horizon environment
        prior (FinitePosterior): Root belief
        budget (SamplingBudget): Per-stage totals
        seed (int): Solve seed
        grid (float, optional): Posterior quantization grid
        callback (SolverCallback, optional): Progress callback
    """

    name = "ucb"

    def __init__(self, env, prior, budget, seed, grid=None, callback=None):
        _require_finite_horizon(env)
        if not isinstance(prior, FinitePosterior):
            raise ConfigurationError("adaptive sampling needs a finite parameter space")
        self.env = env
        self.prior = prior
        self.budget = budget
        self.seed = seed
        self.grid = prior.default_grid if grid is None else grid
        self.callback = callback or LoggingCallback()
        self.scale = cost_scale(env, prior.atoms)
        self.table = ValueTable(env.horizon, self.grid)
        self._clock = _StageClock(env.horizon)

    def value(self, stage, state, belief, key=None):
        if stage >= self.env.horizon:
            return 0.0
        key = belief.key(self.grid) if key is None else key
        entry = self.table.get(stage, state, key)
        if entry is not None:
            return entry[0]
        self._clock.enter()
        rng = streams.stream(self.seed, streams.SOLVE, stage, state, key.coords)
        value, estimates, _ = ucb_stage(self.env, state, belief, _LazyOracle(self, stage + 1),
                                        self.budget.stage_total(stage), rng, self.scale)
        self._clock.leave(stage)
        self.table.store(stage, state, key, value, self.env.actions(state)[int(np.argmin(estimates))])
        return value

    def solve(self, state=None):
        state = self.env.initial_state if state is None else int(state)
        started = time.perf_counter()
        value = self.value(0, state, self.prior)
        _report_stages(self.callback, self.name, self.table, self._clock.seconds)
        self.callback.on_solve_complete(self.name, value, time.perf_counter() - started)
        return Policy(self.env, self.table, state, self.prior, name=self.name)


class _LazyOracle(ValueOracle):

    def __init__(self, solver, stage):
        self.solver = solver
        self.stage = stage

    def values(self, states, batch):
        result = np.zeros(len(states))
        if self.stage >= self.solver.env.horizon:
            return result
        for i, (state, key) in enumerate(zip(states, batch.keys(self.solver.grid))):
            if key is not None:
                result[i] = self.solver.value(self.stage, int(state), batch.posterior(i), key)
        return result


def ucb_solve(env, prior, budget, seed, **options):
    """
    Solve a finite-horizon BR-MDP with adaptive sampling (expectation only).

    Returns:
        Policy: Greedy policy; ``policy.root_value()`` is the stage-0 estimate
    """
    return AdaptiveSampling(env, prior, budget, seed, **options).solve()


def ucb_error_rate(budgets):
    """Shape ``sum_t ln N_t / N_t`` of the adaptive-sampling error bound."""
    return float(sum(math.log(n) / n for n in budgets))


def solve(env, prior, rho, solver="exact", budget=None, seed=0, **options):
    """
    Dispatch to one of the finite-horizon solvers.

    Args:
        env (Environment): Finite-horizon environment
        prior: Root belief
        rho (RiskFunctional): Risk functional
        solver (str): ``exact``, ``nso`` or ``ucb``
        budget (SamplingBudget, optional): Budgets of the sampling solvers
        seed (int): Solve seed for the sampling solvers
        **options: Solver-specific options (grid, state_cap, callback, ...);
            options a solver does not read are dropped

    Returns:
        Policy: The solved policy

    Raises:
        ConfigurationError: If the solver is unknown or cannot handle ``rho``
    """
    nested = {name: options.pop(name) for name in ("paths", "beliefs_per_stage") if name in options}
    if solver == "exact":
        return exact_dp(env, prior, rho, **options)[1]
    options.pop("state_cap", None)
    if solver == "nso":
        return nso_solve(env, prior, rho, budget, seed, **nested, **options)
    if solver == "ucb":
        if rho.kind != EXPECTATION:
            raise ConfigurationError("adaptive sampling supports the expectation only, got %s" % rho)
        return ucb_solve(env, prior, budget, seed, **options)
    raise ConfigurationError("unknown solver %r (expected exact, nso or ucb)" % (solver,))
