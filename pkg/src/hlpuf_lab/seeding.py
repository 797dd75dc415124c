"""Deterministic RNG derivation.

Every stochastic routine in this package takes an explicit numpy Generator.
Hierarchical streams are derived from (seed, *path) integers so that parallel
trials never share state and reruns are bit-identical.
"""

import numpy as np


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream identified by a master seed and an index path."""
    entropy = [int(seed)] + [int(p) for p in path]
    if any(e < 0 for e in entropy):
        raise ValueError("seed path entries must be non-negative integers")
    return np.random.default_rng(np.random.SeedSequence(entropy))
