"""Seeded RNG streams.

All randomness flows through a counter-based Philox generator.  Monte-Carlo
replications derive independent streams from (master seed, replication index),
so serial and parallel execution orders produce identical draws.
"""

from __future__ import annotations

import numpy as np


def derive_rng(master_seed: int, *keys: int) -> np.random.Generator:
    """Generator for a (seed, key...) address in the stream tree."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(keys))
    return np.random.Generator(np.random.Philox(seq))


def replication_rngs(master_seed: int, n_reps: int) -> list[np.random.Generator]:
    """One independent generator per replication index."""
    return [derive_rng(master_seed, i) for i in range(n_reps)]
