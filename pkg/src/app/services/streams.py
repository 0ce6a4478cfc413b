"""Reproducible random streams.

A stream is a numpy Generator over the counter-based Philox bit generator,
keyed by (master_seed, *key) through SeedSequence's spawn key. Two distinct
keys never share a stream and the derivation does not depend on the order in
which streams are requested.
"""

from __future__ import annotations

import numpy as np

from app.core.errors import InputError

MAX_SEED = 2**64 - 1

# key namespaces, so experiment paths and remainder traces never collide
EXPERIMENT = 0
REMAINDER_TRACE = 1
LLN_CHECK = 2


def replication_stream(master_seed: int, *key: int) -> np.random.Generator:
    if not 0 <= master_seed <= MAX_SEED:
        raise InputError("master seed must be an unsigned 64-bit integer")
    sequence = np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))
