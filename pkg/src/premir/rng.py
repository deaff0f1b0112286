"""Seeded random streams.

Every random draw in the package comes from a generator derived from one
64-bit root seed plus a tuple of integer keys, so folds, batch shuffles,
weight initialisation and dropout never share a stream.
"""
import numpy as np

# stream identifiers
FOLDS = 1
BATCHES = 2
INIT = 3
DROPOUT = 4
SYNTH = 5
GRADCHECK = 6


def stream(seed, *keys):
    """Return an independent Philox generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
