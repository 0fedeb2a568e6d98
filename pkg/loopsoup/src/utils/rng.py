"""Seeded generators and the batch stream-split rule.

Every random draw in the package goes through a `numpy.random.Generator` backed
by PCG64. A run seed is expanded with `SeedSequence(seed).spawn(count)` and
batch ``i`` always receives child ``i``, so results do not depend on how many
workers execute the batches.
"""

from typing import List

import numpy as np

SEED_MASK = (1 << 64) - 1


def make_generator(seed: int) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed) & SEED_MASK)))


def spawn_seeds(seed: int, count: int) -> List[np.random.SeedSequence]:
    """One child seed sequence per batch index."""
    return np.random.SeedSequence(int(seed) & SEED_MASK).spawn(count)


def generator_from(seed_sequence: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence))


def child_int_seed(rng: np.random.Generator) -> int:
    """32-bit integer seed for libraries that only take plain integers (networkx)."""
    return int(rng.integers(0, 2**32 - 1))
