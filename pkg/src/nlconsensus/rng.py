"""Named random streams derived from one root seed.

Each consumer asks for a stream by name. The name is hashed into the spawn key
of a counter-based Philox generator, so adding a consumer never shifts the
numbers another consumer sees.
"""
from __future__ import annotations

import zlib

import numpy as np


def stream(root_seed: int, name: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(zlib.crc32(name.encode()),))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng, name: str = "default") -> np.random.Generator:
    """Accept a Generator, an int root seed or None (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return stream(0 if rng is None else int(rng), name)
