"""Deterministic RNG stream derivation.

All randomized components draw from PCG64 generators derived from one
64-bit master seed through ``numpy.random.SeedSequence`` spawn keys.  The
key path is a tuple of small integers whose first entry names the consumer
(grammar sampling, data generation, chain stepping, ...) and whose
remaining entries index the task (sweep cell, realization, chain batch).
Two distinct key paths give statistically independent streams, so results
are reproducible regardless of execution order or worker count.
"""

from __future__ import annotations

import numpy as np

# First key entry: which component the stream feeds.
GRAMMAR = 0
DATA = 1
CHAIN = 2
BASELINE = 3
INIT = 4
MISC = 5


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``key`` under ``master_seed``.

    The same (seed, key) pair always yields the same stream; different
    keys never share state.
    """
    seq = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


def derive_seed(master_seed: int, *key: int) -> int:
    """A 63-bit integer seed derived from (master_seed, key), for records
    that store a plain seed (e.g. grammar parameters)."""
    return int(stream(master_seed, *key).integers(0, 2**63))
