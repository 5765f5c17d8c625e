"""
Value tables, policies and sampling budgets shared by the solvers.

A :class:`ValueTable` maps ``(stage, state, PosteriorKey)`` to a value and a
greedy action. Lookups for keys that were never stored fall back to the
nearest stored key of the same state in L1 distance on the quantized
coordinates; rollouts routinely visit beliefs the solver never saw.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError

NEAREST_CHUNK = 2048


class ValueTable:
    """
    Per-stage map from ``(state, PosteriorKey)`` to ``(value, action)``.

    Stage ``horizon`` is terminal and reads as zero everywhere. A table built
    with ``horizon=None`` is stationary: every stage reads the same entries.

    Attributes:
        horizon (int or None): Terminal stage, None for a stationary table
        grid (float): Quantization grid of the stored keys
    """

    def __init__(self, horizon=None, grid=None):
        self.horizon = horizon
        self.grid = grid
        self._entries = {}
        self._groups = {}
        self._arrays = {}

    def __len__(self):
        return len(self._entries)

    def _stage(self, stage):
        return 0 if self.horizon is None else int(stage)

    def is_terminal(self, stage):
        return self.horizon is not None and stage >= self.horizon

    def store(self, stage, state, key, value, action=None):
        """
        Store the value (and greedy action) of an augmented state.

        Raises:
            DomainError: If the value is not finite
        """
        if not math.isfinite(value):
            raise DomainError("refusing to store non-finite value %r at stage %s state %s" % (value, stage, state))
        entry = (self._stage(stage), int(state), key)
        if entry not in self._entries:
            group = (entry[0], entry[1], key.kind)
            self._groups.setdefault(group, []).append(key)
            self._arrays.pop(group, None)
        self._entries[entry] = (float(value), action)

    def get(self, stage, state, key):
        """Return the stored ``(value, action)`` pair, or None."""
        return self._entries.get((self._stage(stage), int(state), key))

    def lookup(self, stage, state, key):
        """Exact lookup; terminal stages give 0.0, unknown keys give None."""
        if self.is_terminal(stage):
            return 0.0
        entry = self.get(stage, state, key)
        return None if entry is None else entry[0]

    def _group_arrays(self, stage, state, kind):
        group = (self._stage(stage), int(state), kind)
        arrays = self._arrays.get(group)
        if arrays is None:
            keys = self._groups.get(group)
            if not keys:
                return None
            coords = np.array([k.coords for k in keys], dtype=np.int64)
            values = np.array([self._entries[(group[0], group[1], k)][0] for k in keys])
            arrays = self._arrays[group] = (keys, coords, values)
        return arrays

    def nearest(self, stage, state, key):
        """The stored key of ``state`` closest to ``key``; ties go to the earliest stored key."""
        arrays = self._group_arrays(stage, state, key.kind)
        if arrays is None:
            return None
        keys, coords, _ = arrays
        distances = np.abs(coords - np.asarray(key.coords, dtype=np.int64)[None, :]).sum(axis=1)
        return keys[int(np.argmin(distances))]

    def nearest_values(self, stage, state, kind, coords):
        """
        Values of the nearest stored keys for many quantized coordinates at once.

        Args:
            stage (int): Stage
            state (int): Physical state
            kind (str): Belief kind of the queries
            coords (numpy.ndarray): Query coordinates, shape (n, d)

        Returns:
            numpy.ndarray: Values, shape (n,)

        Raises:
            DomainError: If nothing is stored for ``(stage, state)``
        """
        if self.is_terminal(stage):
            return np.zeros(coords.shape[0])
        arrays = self._group_arrays(stage, state, kind)
        if arrays is None:
            raise DomainError("no values stored for stage %s state %s" % (stage, state))
        _, stored, values = arrays
        result = np.empty(coords.shape[0])
        for start in range(0, coords.shape[0], NEAREST_CHUNK):
            chunk = coords[start:start + NEAREST_CHUNK]
            distances = np.abs(chunk[:, None, :] - stored[None, :, :]).sum(axis=2)
            result[start:start + NEAREST_CHUNK] = values[np.argmin(distances, axis=1)]
        return result

    def value(self, stage, state, key):
        """Value with nearest-key fallback; terminal stages give 0.0."""
        if self.is_terminal(stage):
            return 0.0
        entry = self.get(stage, state, key)
        if entry is None:
            nearest = self.nearest(stage, state, key)
            if nearest is None:
                raise DomainError("no values stored for stage %s state %s" % (stage, state))
            entry = self.get(stage, state, nearest)
        return entry[0]

    def action(self, stage, state, key):
        """Greedy action with nearest-key fallback, or None when nothing is stored for the state."""
        entry = self.get(stage, state, key)
        if entry is None:
            nearest = self.nearest(stage, state, key)
            entry = None if nearest is None else self.get(stage, state, nearest)
        return None if entry is None else entry[1]

    def sizes(self):
        """Number of stored augmented states per stage."""
        counts = {}
        for stage, _, _ in self._entries:
            counts[stage] = counts.get(stage, 0) + 1
        return dict(sorted(counts.items()))

    def items(self):
        for (stage, state, key), (value, action) in self._entries.items():
            yield stage, state, key, value, action


class Policy:
    """
    A deterministic Markov policy over augmented states, read from a value table.

    Beliefs are quantized with the table's grid; unseen keys use the nearest
    stored key of the same state, and states with no stored entry use their
    first admissible action.

    Attributes:
        env (Environment): Environment the policy acts in
        table (ValueTable): Source of greedy actions
        root_state (int): Initial physical state
        root_belief: Initial posterior the policy was solved from
        name (str): Label used in logs
    """

    def __init__(self, env, table, root_state, root_belief, name="policy"):
        self.env = env
        self.table = table
        self.root_state = int(root_state)
        self.root_belief = root_belief
        self.name = name

    def __repr__(self):
        return "Policy(name=%r, entries=%d)" % (self.name, len(self.table))

    @property
    def stationary(self):
        return self.table.horizon is None

    def act(self, stage, state, belief):
        admissible = self.env.actions(state)
        action = self.table.action(stage, state, belief.key(self.table.grid))
        if action is None or action not in admissible:
            return admissible[0]
        return action

    def root_value(self):
        """Solver value at the root augmented state."""
        return self.table.value(0, self.root_state, self.root_belief.key(self.table.grid))


class ValueOracle:
    """Continuation values ``V(s', mu')`` for a batch of successor augmented states."""

    def values(self, states, batch):
        """
        Args:
            states (numpy.ndarray): Successor physical states, shape (n,)
            batch (PosteriorBatch): Successor beliefs, one per state

        Returns:
            numpy.ndarray: Values, shape (n,); zero for invalid batch members
        """
        raise NotImplementedError


class ZeroOracle(ValueOracle):
    """The terminal value function."""

    def values(self, states, batch):
        return np.zeros(len(states))


class TableOracle(ValueOracle):
    """Reads one stage of a :class:`ValueTable` with nearest-key projection."""

    def __init__(self, table, stage):
        self.table = table
        self.stage = stage

    def values(self, states, batch):
        states = np.asarray(states)
        result = np.zeros(states.shape[0])
        if self.table.is_terminal(self.stage):
            return result
        coords = batch.coords(self.table.grid)
        valid = np.asarray(batch.valid)
        for state in np.unique(states):
            rows = np.flatnonzero((states == state) & valid)
            if rows.size:
                result[rows] = self.table.nearest_values(self.stage, int(state), batch.kind, coords[rows])
        return result


@dataclass(frozen=True)
class SamplingBudget:
    """
    Simulation budgets of the sampling solvers.

    Attributes:
        outer (int or None): Posterior draws N per action (nested simulation)
        inner (int or None): Observation draws K per posterior draw (nested simulation)
        per_stage (tuple): Total plays N_t per stage (adaptive sampling); a
            shorter tuple repeats its last entry
    """

    outer: int = None
    inner: int = None
    per_stage: tuple = field(default_factory=tuple)

    def __post_init__(self):
        for name in ("outer", "inner"):
            value = getattr(self, name)
            if value is not None and (int(value) != value or value < 1):
                raise ConfigurationError("budget %s must be a positive integer, got %r" % (name, value))
        per_stage = tuple(int(n) for n in self.per_stage)
        if any(n < 1 for n in per_stage):
            raise ConfigurationError("per-stage budgets must be positive, got %r" % (per_stage,))
        object.__setattr__(self, "per_stage", per_stage)

    def require_nested(self):
        if self.outer is None or self.inner is None:
            raise ConfigurationError("nested simulation needs both outer and inner budgets")
        return int(self.outer), int(self.inner)

    def stage_total(self, stage):
        if not self.per_stage:
            raise ConfigurationError("adaptive sampling needs per-stage budgets")
        return self.per_stage[min(stage, len(self.per_stage) - 1)]
