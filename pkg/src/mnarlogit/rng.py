"""Seedable, splittable random streams.

Every stream is a PCG64 generator keyed by ``SeedSequence(seed,
spawn_key=path)``, so replicate ``i`` of a run seeded with ``seed`` always
sees the same numbers no matter how many workers there are or in which
order replicates finish.
"""

import numpy as np


def stream(seed, *path):
    """Generator for the derived stream ``(seed, *path)``."""
    seed = int(seed)
    if seed < 0 or seed >= 2 ** 64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))


def derived_seed(seed, *path):
    """A 64-bit integer seed for the derived stream, for APIs that take an int."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
