"""Seeded random substreams.

Each run derives four independent counter-based (Philox) streams from one seed,
so that query draws, action sampling, reservoir replacement and the environment
never consume each other's randomness.
"""

import numpy as np

STREAMS = ("query", "action", "reservoir", "environment")


def substream(seed: int, name: str) -> np.random.Generator:
    child = np.random.SeedSequence(int(seed)).spawn(len(STREAMS))[STREAMS.index(name)]
    return np.random.Generator(np.random.Philox(child))
