"""Counter-based random streams.

Every stream is a Philox generator keyed by the master seed and a tuple of
non-negative integers (cell indices, replicate index).  Observation ``i`` of a
stream always consumes the same position of the Philox counter sequence, so a
replicate is reproducible regardless of which worker evaluates it.
"""
from __future__ import annotations

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
