"""Counter-based random streams (Philox) with up-front substream assignment.

Every experiment cell, dataset and bootstrap replicate draws from its own
stream keyed by a tuple of integers, so results do not depend on execution
order or on how work is split between workers.
"""

from __future__ import annotations

import numpy as np


def stream(seed, *key):
    """Independent generator for substream ``key`` of master ``seed``."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    ss = np.random.SeedSequence(entropy, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def spawn(rng, count):
    """Split ``count`` child generators off ``rng``'s bit generator."""
    return [np.random.Generator(bg) for bg in rng.bit_generator.spawn(count)]
