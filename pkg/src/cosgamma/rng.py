"""Seeded random streams.

Every stochastic routine takes either an integer seed or an existing
``numpy.random.Generator``.  Integer seeds map to PCG64 through numpy's
``SeedSequence``, which is stable across platforms and numpy releases.
"""

import numpy as np


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def child_generator(seed, *key):
    """Independent stream addressed by ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
