"""Seedable random streams addressed by campaign position.

Every random decision in a campaign draws from a stream derived from
``(master_seed, domain, iteration, slot)``. Streams never depend on which
thread asks for them or in what order, which is what makes batch and
pipelined campaigns reproducible.
"""

import numpy as np

# stream domains; a new consumer of randomness gets its own tag
MUTATE = 0
RANDOM_BASELINE = 1
TEST = 7


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``master_seed`` and position ``key``."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))
