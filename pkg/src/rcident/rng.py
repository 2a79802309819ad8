"""Reproducible random streams (counter-based Philox seeded by a SeedSequence)."""

import numpy as np


def make_rng(seed, *spawn_key) -> np.random.Generator:
    """Generator for ``seed``; ``spawn_key`` selects an independent sub-stream."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.Philox(ss))
