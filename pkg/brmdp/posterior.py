"""
Posterior beliefs over the unknown parameter and their Bayes updates.

Two belief forms are supported: :class:`FinitePosterior`, a weight vector over
the atoms of a finite parameter space, and :class:`NormalMeanPosterior`, the
conjugate normal belief over the mean of a normal observation model. Both are
immutable; every update returns a new belief.

Value tables are keyed by :class:`PosteriorKey`, a quantized image of a belief.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ImpossibleObservationError

FINITE_KIND = "finite"
NORMAL_KIND = "normal-mean"

FINITE_GRID = 1e-6
NORMAL_GRID = 1e-4
# Draws outside the parameter space are redrawn this many times before clamping.
MAX_REDRAWS = 100


@dataclass(frozen=True)
class PosteriorKey:
    """
    Quantized belief: integer coordinates on a grid of the given spacing.

    Finite beliefs use their weights as coordinates; normal-mean beliefs use
    ``(mean, precision)``.
    """

    kind: str
    grid: float
    coords: tuple

    @property
    def values(self):
        return np.asarray(self.coords, dtype=float) * self.grid

    def distance(self, other):
        """L1 distance between the dequantized coordinates of two keys."""
        if other.kind != self.kind or len(other.coords) != len(self.coords):
            return math.inf
        return float(np.abs(self.values - other.values).sum())


def _quantize_coords(values, grid):
    if not grid > 0:
        raise DomainError("quantization grid must be positive, got %r" % (grid,))
    # np.rint rounds half to even.
    return np.rint(np.asarray(values, dtype=float) / grid).astype(np.int64)


class FinitePosterior:
    """
    Belief over a finite set of parameter atoms.

    Attributes:
        atoms (numpy.ndarray): Parameter values, strictly increasing
        weights (numpy.ndarray): Probability of each atom
    """

    kind = FINITE_KIND
    default_grid = FINITE_GRID
    __slots__ = ("atoms", "weights")

    def __init__(self, atoms, weights):
        atoms = np.array(atoms, dtype=float)
        weights = np.array(weights, dtype=float)
        if atoms.ndim != 1 or atoms.size == 0 or atoms.shape != weights.shape:
            raise DomainError("atoms and weights must be non-empty vectors of equal length")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise DomainError("posterior weights must be a probability vector, got %s" % (weights,))
        weights = weights / weights.sum()
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    def __setattr__(self, name, value):
        raise AttributeError("FinitePosterior is immutable")

    def __repr__(self):
        return "FinitePosterior(atoms=%s, weights=%s)" % (self.atoms.tolist(), self.weights.tolist())

    def __eq__(self, other):
        return (isinstance(other, FinitePosterior)
                and np.array_equal(self.atoms, other.atoms)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.atoms.tobytes(), self.weights.tobytes()))

    @classmethod
    def uniform(cls, atoms):
        atoms = np.asarray(atoms, dtype=float)
        return cls(atoms, np.full(atoms.size, 1.0 / atoms.size))

    @classmethod
    def point_mass(cls, theta):
        """Degenerate belief on a single atom; the resulting BR-MDP is a standard MDP."""
        return cls([float(theta)], [1.0])

    @property
    def support(self):
        """Atoms carrying positive weight."""
        return self.atoms[self.weights > 0]

    def mean(self):
        return float(self.weights @ self.atoms)

    def _from_log_weights(self, log_weights):
        top = np.max(log_weights)
        if not np.isfinite(top):
            raise ImpossibleObservationError("every atom assigns zero likelihood to the observations")
        weights = np.exp(log_weights - top)
        return FinitePosterior(self.atoms, weights / weights.sum())

    def _log_weights(self):
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def update(self, family, xi):
        """
        Bayes update on one observation.

        Raises:
            ImpossibleObservationError: If every atom with positive weight
                gives the observation zero likelihood
        """
        log_likelihood = family.log_likelihood(self.atoms, np.array([float(xi)]))[0]
        return self._from_log_weights(self._log_weights() + log_likelihood)

    def init_from_data(self, family, data):
        """Fold a batch of i.i.d. observations into the belief, in log space."""
        data = np.asarray(data, dtype=float).ravel()
        if data.size == 0:
            return self
        log_likelihood = family.log_likelihood(self.atoms, data).sum(axis=0)
        return self._from_log_weights(self._log_weights() + log_likelihood)

    def update_batch(self, family, xi):
        """
        Update the belief on each observation of ``xi`` separately.

        Rows of impossible observations are left as NaN and flagged invalid in
        the returned batch.
        """
        log_weights = self._log_weights()[None, :] + family.log_likelihood(self.atoms, np.asarray(xi, dtype=float))
        top = np.max(log_weights, axis=1, keepdims=True)
        valid = np.isfinite(top[:, 0])
        with np.errstate(invalid="ignore"):
            weights = np.exp(log_weights - np.where(valid[:, None], top, 0.0))
            weights = weights / weights.sum(axis=1, keepdims=True)
        weights[~valid] = np.nan
        return FiniteBatch(self.atoms, weights, valid)

    def sample_theta(self, rng, size=None):
        """Categorical draw over the atoms."""
        if size is None:
            return float(self.sample_thetas(rng, 1)[0])
        return self.sample_thetas(rng, size)

    def sample_thetas(self, rng, size):
        indices = rng.choice(self.atoms.size, size=size, p=self.weights)
        return self.atoms[indices]

    def key(self, grid=None):
        grid = self.default_grid if grid is None else grid
        return PosteriorKey(FINITE_KIND, grid, tuple(int(c) for c in _quantize_coords(self.weights, grid)))

    def repeat(self, size):
        return ConstantBatch(self, size)


class PosteriorBatch:
    """
    A vector of beliefs of one kind, produced by updating a single belief on
    each of several observations.

    Attributes:
        kind (str): Belief kind shared by every member
        valid (numpy.ndarray): False where the observation was impossible
    """

    kind = None

    def __len__(self):
        return self.valid.shape[0]

    def coords(self, grid):
        """Quantized coordinates, shape (n, d); rows of invalid members are zero."""
        raise NotImplementedError

    def keys(self, grid):
        coords = self.coords(grid)
        return [PosteriorKey(self.kind, grid, tuple(row.tolist())) if ok else None
                for row, ok in zip(coords, self.valid)]

    def posterior(self, index):
        raise NotImplementedError


class FiniteBatch(PosteriorBatch):
    """Finite beliefs sharing one atom vector, one row of weights per belief."""

    kind = FINITE_KIND

    def __init__(self, atoms, weights, valid):
        self.atoms = atoms
        self.weights = weights
        self.valid = valid

    def coords(self, grid):
        return _quantize_coords(np.where(self.valid[:, None], self.weights, 0.0), grid)

    def posterior(self, index):
        return FinitePosterior(self.atoms, self.weights[index])


class ConstantBatch(PosteriorBatch):
    """The same belief repeated; used for transitions that do not update the posterior."""

    def __init__(self, belief, size):
        self.belief = belief
        self.kind = belief.kind
        self.valid = np.ones(int(size), dtype=bool)

    def coords(self, grid):
        return np.tile(np.asarray(self.belief.key(grid).coords, dtype=np.int64), (len(self), 1))

    def keys(self, grid):
        return [self.belief.key(grid)] * len(self)

    def posterior(self, index):
        return self.belief


class NormalMeanPosterior:
    """
    Conjugate normal belief N(mean, variance) over the mean of normal
    observations with known standard deviation.

    Truncated-normal observations are folded in with the untruncated normal
    likelihood, which keeps the belief conjugate.

    Attributes:
        mean (float): Posterior mean
        variance (float): Posterior variance, always positive
        stddev (float): Known observation standard deviation
        lower (float): Lower end of the parameter space used by sampling
        upper (float): Upper end of the parameter space used by sampling
    """

    kind = NORMAL_KIND
    default_grid = NORMAL_GRID
    __slots__ = ("mean", "variance", "stddev", "lower", "upper")

    def __init__(self, mean, variance, stddev, lower=-math.inf, upper=math.inf):
        if not variance > 0 or not stddev > 0:
            raise DomainError("normal-mean posterior needs positive variance and stddev")
        for name, value in (("mean", float(mean)), ("variance", float(variance)), ("stddev", float(stddev)),
                            ("lower", float(lower)), ("upper", float(upper))):
            object.__setattr__(self, name, value)

    def __setattr__(self, name, value):
        raise AttributeError("NormalMeanPosterior is immutable")

    def __repr__(self):
        return "NormalMeanPosterior(mean=%r, variance=%r, stddev=%r)" % (self.mean, self.variance, self.stddev)

    def __eq__(self, other):
        return (isinstance(other, NormalMeanPosterior)
                and (self.mean, self.variance, self.stddev, self.lower, self.upper)
                == (other.mean, other.variance, other.stddev, other.lower, other.upper))

    def __hash__(self):
        return hash((self.mean, self.variance, self.stddev, self.lower, self.upper))

    @property
    def precision(self):
        return 1.0 / self.variance

    def _replace(self, mean, variance):
        return NormalMeanPosterior(mean, variance, self.stddev, self.lower, self.upper)

    def update(self, family, xi):
        noise = self.stddev ** 2
        mean = (noise * self.mean + self.variance * float(xi)) / (noise + self.variance)
        variance = self.variance * noise / (self.variance + noise)
        return self._replace(mean, variance)

    def init_from_data(self, family, data):
        data = np.asarray(data, dtype=float).ravel()
        if data.size == 0:
            return self
        precision = self.precision + data.size / self.stddev ** 2
        mean = (self.mean * self.precision + data.sum() / self.stddev ** 2) / precision
        return self._replace(mean, 1.0 / precision)

    def update_batch(self, family, xi):
        xi = np.asarray(xi, dtype=float)
        noise = self.stddev ** 2
        means = (noise * self.mean + self.variance * xi) / (noise + self.variance)
        variance = self.variance * noise / (self.variance + noise)
        return NormalBatch(means, variance, self)

    def sample_thetas(self, rng, size):
        """
        Normal draws kept inside ``[lower, upper]``: out-of-range draws are
        redrawn up to ``MAX_REDRAWS`` times, then clamped.
        """
        scale = math.sqrt(self.variance)
        draws = rng.normal(self.mean, scale, size=size)
        outside = (draws < self.lower) | (draws > self.upper)
        for _ in range(MAX_REDRAWS):
            if not np.any(outside):
                break
            draws[outside] = rng.normal(self.mean, scale, size=int(outside.sum()))
            outside = (draws < self.lower) | (draws > self.upper)
        return np.clip(draws, self.lower, self.upper)

    def sample_theta(self, rng, size=None):
        return float(self.sample_thetas(rng, 1)[0]) if size is None else self.sample_thetas(rng, size)

    def key(self, grid=None):
        grid = self.default_grid if grid is None else grid
        mean, precision = _quantize_coords([self.mean, self.precision], grid)
        return PosteriorKey(NORMAL_KIND, grid, (int(mean), int(precision)))

    def repeat(self, size):
        return ConstantBatch(self, size)


class NormalBatch(PosteriorBatch):
    """Normal-mean beliefs sharing one variance, one mean per belief."""

    kind = NORMAL_KIND

    def __init__(self, means, variance, parent):
        self.means = means
        self.variance = variance
        self.parent = parent
        self.valid = np.ones(means.shape, dtype=bool)

    def coords(self, grid):
        means = _quantize_coords(self.means, grid)
        precision = _quantize_coords(1.0 / self.variance, grid)
        return np.column_stack([means, np.full(means.shape, precision)])

    def posterior(self, index):
        return self.parent._replace(self.means[index], self.variance)


def update(posterior, family, xi):
    """Return the posterior after observing ``xi``."""
    return posterior.update(family, xi)


def init_from_data(prior, family, data):
    """Return the posterior after observing every point of ``data``; an empty dataset returns ``prior``."""
    return prior.init_from_data(family, data)


def sample_theta(posterior, rng):
    return posterior.sample_theta(rng)


def quantize(posterior, grid=None):
    """Return the :class:`PosteriorKey` of ``posterior`` on the given grid."""
    return posterior.key(grid)
