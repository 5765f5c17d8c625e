"""
Randomness models and the environment abstraction.

This module defines the parameter spaces and parametric families that generate
the randomness ``xi`` of a BR-MDP, the :class:`Environment` base class that
carries the state equation ``g(s, a, xi)`` and stage cost ``C(s, a, xi)``, and
the augmented state ``(s, mu)`` every solver works on.

Observations are carried as floats for every family so that one posterior
update path serves discrete and continuous families alike.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre
from scipy import special, stats

from .errors import ConfigurationError, DomainError

FINITE = "finite"
CONTINUOUS = "continuous"

# Tail mass allowed beyond the truncated support of a discrete family.
DEFAULT_TAIL = 1e-10
MAX_SUPPORT_SIZE = 100000
# Truncated-normal draws switch to rejection sampling below this mass.
REJECTION_MASS = 1e-6
DEFAULT_QUADRATURE_NODES = 48
ATOM_TOLERANCE = 1e-12
COST_BOUND_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ParameterSpace:
    """
    The set Theta the unknown parameter lives in.

    A finite space holds strictly increasing atoms; a continuous space is an
    interval ``[lower, upper]`` whose upper end may be infinite.
    """

    kind: str
    atoms: tuple = ()
    lower: float = -math.inf
    upper: float = math.inf

    def __post_init__(self):
        if self.kind == FINITE:
            atoms = tuple(float(a) for a in self.atoms)
            if not atoms:
                raise DomainError("finite parameter space needs at least one atom")
            if any(b <= a for a, b in zip(atoms, atoms[1:])):
                raise DomainError("finite atoms must be strictly increasing: %s" % (atoms,))
            object.__setattr__(self, "atoms", atoms)
            object.__setattr__(self, "lower", atoms[0])
            object.__setattr__(self, "upper", atoms[-1])
        elif self.kind == CONTINUOUS:
            if self.atoms:
                raise DomainError("continuous parameter space takes no atoms")
            if not self.lower < self.upper:
                raise DomainError("continuous bounds need lower < upper, got %r, %r" % (self.lower, self.upper))
        else:
            raise DomainError("unknown parameter space kind: %r" % (self.kind,))

    @classmethod
    def finite(cls, atoms):
        return cls(FINITE, atoms=tuple(atoms))

    @classmethod
    def continuous(cls, lower, upper=None):
        return cls(CONTINUOUS, lower=float(lower), upper=math.inf if upper is None else float(upper))

    @property
    def is_finite(self):
        return self.kind == FINITE

    def contains(self, theta):
        """Return True if ``theta`` is an atom (finite) or inside the interval (continuous)."""
        theta = float(theta)
        if self.is_finite:
            return any(abs(theta - a) <= ATOM_TOLERANCE * max(1.0, abs(a)) for a in self.atoms)
        return self.lower <= theta <= self.upper

    def clamp(self, theta):
        """Project ``theta`` onto the space (nearest atom or interval end)."""
        theta = float(theta)
        if self.is_finite:
            return min(self.atoms, key=lambda a: (abs(a - theta), a))
        return min(max(theta, self.lower), self.upper)


class ParametricFamily:
    """
    A parametric family f(.; theta) over a parameter space.

    Subclasses provide vectorised log densities and sampling; this base class
    adds parameter validation, support handling and the integration grids used
    by the exact solvers.

    Attributes:
        space (ParameterSpace): Admissible parameter values
        discrete (bool): True for integer-valued families
    """

    name = None
    discrete = True

    def __init__(self, space):
        self.space = space

    def __repr__(self):
        return "%s(space=%r)" % (type(self).__name__, self.space)

    def _valid_theta(self, theta):
        return True

    def check_theta(self, theta):
        """
        Validate a parameter value.

        Raises:
            DomainError: If ``theta`` lies outside the parameter space
        """
        if not np.isfinite(theta) or not self.space.contains(theta) or not self._valid_theta(theta):
            raise DomainError("theta=%r is outside the parameter space of %s" % (theta, self.name))

    def in_support(self, xi):
        """Return a boolean array telling which observations lie in the support."""
        raise NotImplementedError

    def log_likelihood(self, thetas, xi):
        """
        Log densities for every (observation, parameter) pair.

        Args:
            thetas (array-like): Parameter values, shape (k,)
            xi (array-like): Observations, shape (n,)

        Returns:
            numpy.ndarray: Array of shape (n, k); ``-inf`` outside the support
        """
        raise NotImplementedError

    def likelihood(self, thetas, xi):
        with np.errstate(divide="ignore", under="ignore"):
            return np.exp(self.log_likelihood(thetas, xi))

    def density(self, theta, xi):
        """
        Evaluate f(xi; theta).

        Observations outside the support have density zero.

        Raises:
            DomainError: If ``theta`` lies outside the parameter space
        """
        self.check_theta(theta)
        values = self.likelihood(np.array([float(theta)]), np.atleast_1d(np.asarray(xi, dtype=float)))[:, 0]
        return float(values[0]) if np.ndim(xi) == 0 else values

    def draw(self, thetas, rng, shape):
        """Draw observations; ``thetas`` broadcasts against ``shape``. No validation."""
        raise NotImplementedError

    def sample(self, theta, rng, size=None):
        """
        Draw from f(.; theta).

        Raises:
            DomainError: If ``theta`` lies outside the parameter space
        """
        self.check_theta(theta)
        shape = () if size is None else size
        values = self.draw(np.full(shape, float(theta)), rng, shape)
        return float(values) if size is None else values

    def mean(self, theta):
        raise NotImplementedError

    def mean_lower_bound(self):
        """Smallest mean observation over the parameter space."""
        if self.space.is_finite:
            return min(self.mean(a) for a in self.space.atoms)
        return self.mean(self.space.lower)

    def integration_grid(self, thetas, tail=DEFAULT_TAIL):
        """
        Observation grid for exact expectations under each parameter value.

        Discrete families are truncated at the smallest point whose tail mass
        is below ``tail`` under every parameter; the remaining mass is folded
        into the last point so every column sums to one.

        Args:
            thetas (array-like): Parameter values, shape (k,)
            tail (float): Tolerated tail mass

        Returns:
            tuple: ``(xi, probs)`` with ``xi`` of shape (n,) and ``probs`` of
            shape (n, k)

        Raises:
            ConfigurationError: If the truncated support would exceed
                ``MAX_SUPPORT_SIZE`` points
        """
        raise NotImplementedError


class _DiscreteFamily(ParametricFamily):
    """Shared truncation logic of the integer-valued families."""

    support_start = 0

    def in_support(self, xi):
        xi = np.asarray(xi, dtype=float)
        return (xi >= self.support_start) & (np.floor(xi) == xi)

    def _sf(self, k, thetas):
        raise NotImplementedError

    def integration_grid(self, thetas, tail=DEFAULT_TAIL):
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        last = self.support_start
        while np.any(self._sf(last, thetas) >= tail):
            last = max(last + 1, int(last * 1.25))
            if last - self.support_start > MAX_SUPPORT_SIZE:
                raise ConfigurationError(
                    "truncating %s at tail mass %g needs more than %d points" % (self.name, tail, MAX_SUPPORT_SIZE))
        # Walk back to the smallest point satisfying the tolerance.
        while last > self.support_start and np.all(self._sf(last - 1, thetas) < tail):
            last -= 1
        xi = np.arange(self.support_start, last + 1, dtype=float)
        probs = self.likelihood(thetas, xi)
        probs[-1, :] += self._sf(last, thetas)
        return xi, probs


class PoissonFamily(_DiscreteFamily):
    """Poisson counts with mean theta."""

    name = "poisson"
    support_start = 0

    def _valid_theta(self, theta):
        return theta > 0

    def log_likelihood(self, thetas, xi):
        thetas = np.asarray(thetas, dtype=float)
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore"):
            return stats.poisson.logpmf(xi[:, None], thetas[None, :])

    def draw(self, thetas, rng, shape):
        return rng.poisson(thetas, size=shape).astype(float)

    def mean(self, theta):
        return float(theta)

    def _sf(self, k, thetas):
        return stats.poisson.sf(k, thetas)


class GeometricFamily(_DiscreteFamily):
    """Number of trials up to the first success, success probability theta."""

    name = "geometric"
    support_start = 1

    def _valid_theta(self, theta):
        return 0 < theta <= 1

    def log_likelihood(self, thetas, xi):
        thetas = np.asarray(thetas, dtype=float)
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return stats.geom.logpmf(xi[:, None], thetas[None, :])

    def draw(self, thetas, rng, shape):
        return rng.geometric(thetas, size=shape).astype(float)

    def mean(self, theta):
        return 1.0 / float(theta)

    def _sf(self, k, thetas):
        return stats.geom.sf(k, thetas)


class BernoulliFamily(_DiscreteFamily):
    """Zero/one outcomes with success probability theta."""

    name = "bernoulli"
    support_start = 0

    def _valid_theta(self, theta):
        return 0 <= theta <= 1

    def in_support(self, xi):
        xi = np.asarray(xi, dtype=float)
        return (xi == 0) | (xi == 1)

    def log_likelihood(self, thetas, xi):
        thetas = np.asarray(thetas, dtype=float)
        xi = np.asarray(xi, dtype=float)
        with np.errstate(divide="ignore"):
            return stats.bernoulli.logpmf(xi[:, None], thetas[None, :])

    def draw(self, thetas, rng, shape):
        return (rng.random(shape) < thetas).astype(float)

    def mean(self, theta):
        return float(theta)

    def integration_grid(self, thetas, tail=DEFAULT_TAIL):
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        xi = np.array([0.0, 1.0])
        return xi, self.likelihood(thetas, xi)


class TruncatedNormalFamily(ParametricFamily):
    """
    Normal observations with unknown mean theta and known standard deviation,
    left-truncated at ``lower``.

    Sampling inverts the truncated CDF; when the mass above ``lower`` is
    below ``REJECTION_MASS`` it falls back to exponential-proposal rejection
    sampling in the far tail.
    """

    name = "truncated-normal"
    discrete = False

    def __init__(self, space, stddev, lower=1.0, nodes=DEFAULT_QUADRATURE_NODES):
        super().__init__(space)
        if not stddev > 0:
            raise DomainError("truncated-normal stddev must be positive, got %r" % (stddev,))
        self.stddev = float(stddev)
        self.lower = float(lower)
        self.nodes = int(nodes)

    def __repr__(self):
        return "TruncatedNormalFamily(space=%r, stddev=%r, lower=%r)" % (self.space, self.stddev, self.lower)

    def in_support(self, xi):
        return np.asarray(xi, dtype=float) >= self.lower

    def log_likelihood(self, thetas, xi):
        thetas = np.asarray(thetas, dtype=float)[None, :]
        xi = np.asarray(xi, dtype=float)[:, None]
        log_mass = special.log_ndtr((thetas - self.lower) / self.stddev)
        values = stats.norm.logpdf(xi, loc=thetas, scale=self.stddev) - log_mass
        return np.where(xi >= self.lower, values, -np.inf)

    def mass_above_lower(self, theta):
        return special.ndtr((np.asarray(theta, dtype=float) - self.lower) / self.stddev)

    def draw(self, thetas, rng, shape):
        thetas = np.broadcast_to(np.asarray(thetas, dtype=float), shape)
        a = (self.lower - thetas) / self.stddev
        u = rng.random(shape)
        with np.errstate(over="ignore", under="ignore"):
            values = stats.truncnorm.ppf(u, a, np.inf, loc=thetas, scale=self.stddev)
        far = self.mass_above_lower(thetas) < REJECTION_MASS
        if np.any(far):
            values = np.array(values, dtype=float)
            values[far] = thetas[far] + self.stddev * _tail_rejection(a[far], rng)
        return np.maximum(values, self.lower)

    def mean(self, theta):
        a = (self.lower - float(theta)) / self.stddev
        return float(stats.truncnorm.mean(a, np.inf, loc=float(theta), scale=self.stddev))

    def mean_lower_bound(self):
        if self.space.is_finite:
            return min(self.mean(a) for a in self.space.atoms)
        return self.mean(max(self.space.lower, self.lower - 40 * self.stddev))

    def integration_grid(self, thetas, tail=DEFAULT_TAIL):
        """
        Gauss-Legendre nodes on ``[lower, max(theta) + 12 sd]``, weighted by the
        density under each parameter and renormalised per column.
        """
        thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
        upper = max(float(thetas.max()), self.lower) + 12.0 * self.stddev
        nodes, weights = legendre.leggauss(self.nodes)
        xi = self.lower + (nodes + 1.0) * (upper - self.lower) / 2.0
        weights = weights * (upper - self.lower) / 2.0
        probs = weights[:, None] * self.likelihood(thetas, xi)
        totals = probs.sum(axis=0)
        if np.any(totals <= 0):
            raise ConfigurationError("quadrature grid carries no mass for some theta in %s" % (thetas,))
        return xi, probs / totals


def _tail_rejection(a, rng):
    """Standard normal draws conditioned on ``z >= a`` for large ``a`` (exponential proposal)."""
    a = np.asarray(a, dtype=float)
    out = np.empty_like(a)
    pending = np.arange(a.size)
    flat_a = a.ravel()
    flat_out = out.ravel()
    while pending.size:
        lower = flat_a[pending]
        rate = (lower + np.sqrt(lower * lower + 4.0)) / 2.0
        z = lower + rng.exponential(1.0 / rate)
        accept = rng.random(pending.size) <= np.exp(-0.5 * (z - rate) ** 2)
        flat_out[pending[accept]] = z[accept]
        pending = pending[~accept]
    return flat_out.reshape(a.shape)


FAMILIES = {
    PoissonFamily.name: PoissonFamily,
    GeometricFamily.name: GeometricFamily,
    BernoulliFamily.name: BernoulliFamily,
    TruncatedNormalFamily.name: TruncatedNormalFamily,
}


def make_family(kind, space, **params):
    """
    Build a parametric family by name.

    Args:
        kind (str): One of ``poisson``, ``geometric``, ``bernoulli``, ``truncated-normal``
        space (ParameterSpace): Parameter space
        **params: Family parameters (``stddev``, ``lower``, ``nodes`` for truncated-normal)

    Returns:
        ParametricFamily: The family

    Raises:
        ConfigurationError: If the family name is unknown
    """
    try:
        family_class = FAMILIES[kind]
    except KeyError:
        raise ConfigurationError("unknown family %r (expected one of %s)" % (kind, ", ".join(sorted(FAMILIES))))
    return family_class(space, **params)


class Environment:
    """
    A BR-MDP environment: state equation, stage cost, actions and horizon.

    States are dense indices ``0..num_states-1``; :meth:`encode` and
    :meth:`decode` map them to domain states. ``next_state`` and ``cost``
    are vectorised over an array of observations.

    When :meth:`observes` returns False for ``(s, a)`` the posterior is not
    updated on that transition, and ``next_state``/``cost`` must not depend
    on the observation.

    Attributes:
        num_states (int): Number of physical states
        family (ParametricFamily): Randomness model
        horizon (int or float): Number of stages, ``math.inf`` for infinite horizon
        gamma (float): Discount factor
        cost_bound (float or None): Declared bound Z on ``|C|``
    """

    name = "environment"

    def __init__(self, num_states, family, horizon, gamma=1.0, cost_bound=None, initial_state=0):
        if num_states < 1:
            raise DomainError("an environment needs at least one state")
        if not 0 < gamma <= 1:
            raise DomainError("discount factor must lie in (0, 1], got %r" % (gamma,))
        if horizon != math.inf and (int(horizon) != horizon or horizon < 1):
            raise DomainError("horizon must be a positive integer or infinite, got %r" % (horizon,))
        if horizon == math.inf and gamma >= 1:
            raise DomainError("an infinite horizon needs gamma < 1")
        self.num_states = int(num_states)
        self.family = family
        self.horizon = horizon if horizon == math.inf else int(horizon)
        self.gamma = float(gamma)
        self.cost_bound = cost_bound
        self.initial_state = int(initial_state)

    @property
    def finite_horizon(self):
        return self.horizon != math.inf

    def actions(self, state):
        """Admissible actions at ``state``, ascending."""
        raise NotImplementedError

    def next_state(self, state, action, xi):
        raise NotImplementedError

    def cost(self, state, action, xi):
        raise NotImplementedError

    def observes(self, state, action):
        """Whether the transition from ``(state, action)`` updates the posterior."""
        return True

    def action_lower_bound(self, steps_remaining, state, action):
        """
        A lower bound on the risk-adjusted Q-value of ``action`` at ``state``
        valid for every posterior, or ``-inf`` when none is known.
        """
        return -math.inf

    def encode(self, domain_state):
        return int(domain_state)

    def decode(self, state):
        return int(state)

    def check_action(self, state, action):
        if not 0 <= state < self.num_states:
            raise DomainError("state %r is not a valid index of %s" % (state, self.name))
        if action not in self.actions(state):
            raise DomainError("action %r is not admissible at state %r" % (action, state))

    def sweep_cost_bound(self, thetas, tail=DEFAULT_TAIL):
        """
        Largest ``|C(s, a, xi)|`` over every state, action and truncated observation.

        Args:
            thetas (array-like): Parameter values whose supports are swept
            tail (float): Truncation tail mass

        Returns:
            float: The bound Z
        """
        xi, _ = self.family.integration_grid(thetas, tail)
        bound = 0.0
        for state in range(self.num_states):
            for action in self.actions(state):
                bound = max(bound, float(np.max(np.abs(self.cost(state, action, xi)))))
        return bound

    def checked_cost_bound(self, thetas=None, tail=DEFAULT_TAIL):
        """
        The bound Z on ``|C|``, checked against a sweep when parameter values are given.

        Without ``thetas`` (continuous beliefs) the declared bound is returned
        as is; with them the sweep is used when nothing is declared.

        Args:
            thetas (array-like, optional): Parameter values whose supports are swept
            tail (float): Truncation tail mass

        Returns:
            float: The bound Z

        Raises:
            ConfigurationError: If the declared bound is below the swept
                maximum, or no bound is declared and there is nothing to sweep
        """
        declared = None if self.cost_bound is None else float(self.cost_bound)
        if thetas is None or np.size(thetas) == 0:
            if declared is None:
                raise ConfigurationError("a cost bound must be declared for continuous beliefs")
            return declared
        swept = self.sweep_cost_bound(thetas, tail)
        if declared is None:
            return swept
        if swept > declared + COST_BOUND_TOLERANCE * max(1.0, declared):
            raise ConfigurationError("declared cost bound %g is below the swept maximum |C| = %g" % (declared, swept))
        return declared

    def step(self, state, action, xi):
        """
        Apply the state equation and stage cost to one observation.

        Raises:
            DomainError: If the action is inadmissible or ``xi`` is outside the support
        """
        self.check_action(state, action)
        if not bool(self.family.in_support(xi)):
            raise DomainError("xi=%r is outside the support of %s" % (xi, self.family.name))
        values = np.array([float(xi)])
        return int(self.next_state(state, action, values)[0]), float(self.cost(state, action, values)[0])


@dataclass(frozen=True)
class AugmentedState:
    """A physical state paired with the posterior belief over the parameter."""

    physical: int
    belief: object


def step(env, state, action, xi):
    """Return ``(g(s, a, xi), C(s, a, xi))`` for one observation."""
    return env.step(state, action, xi)


def sample_xi(family, theta, rng):
    """Draw one observation from f(.; theta) using the given stream."""
    return family.sample(theta, rng)


def density(family, theta, xi):
    """Evaluate f(xi; theta); zero outside the support."""
    return family.density(theta, xi)
