"""Per-replicate random streams.

Every stream is a Philox (counter-based) generator keyed by
``(master seed, replicate, tag)`` through ``SeedSequence`` spawn keys, so a
replicate's draws never depend on which worker runs it or in what order.
"""
from __future__ import annotations

import numpy as np

# stream tags
PRIMARY = 0
INCREMENT = 1  # second field of a coupled pair
DUAL = 2  # the "v" side of a duality experiment


def stream(seed: int, replicate: int = 0, tag: int = PRIMARY) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(replicate), int(tag)))
    return np.random.Generator(np.random.Philox(ss))


def stream_id(seed: int, replicate: int, tag: int = PRIMARY) -> str:
    return f"{seed}:{replicate}:{tag}"
