"""Counter-based random streams.

Every stochastic step draws from a generator keyed by ``(seed, tag, ...)``
so results do not depend on how work is scheduled across threads.
"""

import numpy as np

INIT = 0
DMH = 1
HYPER = 2
PPC = 3
DATA = 4
TRUTH = 5
SLICE = 6
ORACLE = 7


def stream(seed, *key):
    """Return an independent ``Generator`` for ``seed`` and an integer key path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))
