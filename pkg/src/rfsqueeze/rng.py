"""Counter-based random streams.

Every block of work (a chunk of pulses, a slice of time) draws from its own
Philox generator whose key comes from the user seed and whose counter is
fixed by ``(purpose, block)``. Results therefore do not depend on how many
workers process the blocks or in which order.
"""

from __future__ import annotations

import numpy as np

# purpose tags, one per independent consumer of randomness
PULSED = 1
CW = 2
LASER = 3
SPLIT = 4
THIN = 5


def _key(seed: int) -> np.ndarray:
    if seed < 0 or seed >= 1 << 64:
        raise ValueError(f"seed: must be an unsigned 64-bit integer, got {seed!r}")
    return np.random.SeedSequence(seed).generate_state(2, dtype=np.uint64)


def block_generator(seed: int, purpose: int, block: int) -> np.random.Generator:
    """Generator for one work block; disjoint counter ranges make blocks independent."""
    counter = np.array([0, 0, block, purpose], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=_key(seed), counter=counter))
