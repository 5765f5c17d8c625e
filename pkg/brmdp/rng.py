"""
Counter-based random streams.

Every random draw in the library comes from a stream keyed by the experiment
seed and a tuple of integers (replication, stage, action, ...). Streams are
built on numpy's Philox generator, so a stream depends only on its key and
never on the order in which replications or solver calls are scheduled.
"""

import hashlib

import numpy as np

# Purpose tags keep the streams of one replication apart.
DATA = 0
SOLVE = 1
EVALUATE = 2
BANDIT = 3
UNIVERSE = 4


def fold_key(value):
    """
    Fold a stream key component into a non-negative integer.

    Non-negative integers pass through unchanged; anything else (floats,
    tuples of quantized posterior coordinates, strings) is hashed with
    SHA-256 over its ``repr``.

    Args:
        value: Key component

    Returns:
        int: Non-negative integer suitable for ``SeedSequence.spawn_key``
    """
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool) and value >= 0:
        return int(value)
    if isinstance(value, tuple):
        value = tuple(v.item() if isinstance(v, np.generic) else v for v in value)
    digest = hashlib.sha256(repr(value).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(seed, *keys):
    """
    Build the random stream for ``(seed, *keys)``.

    Args:
        seed (int): Experiment seed
        *keys: Key components, folded with :func:`fold_key`

    Returns:
        numpy.random.Generator: Philox-backed generator
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(fold_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))
