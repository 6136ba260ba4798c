"""Deterministic RNG stream derivation.

Every random draw in the library flows through a child generator derived
from a root seed plus a tuple of purpose tags.  SeedSequence gives
cross-platform determinism and guarantees that parallel execution of
independent cells reproduces the serial results exactly.
"""

from __future__ import annotations

import zlib

import numpy as np


def child_rng(seed: int, *tags) -> np.random.Generator:
    """Return a generator for (seed, tags), independent across tag tuples."""
    entropy = [int(seed) & 0xFFFFFFFF] + [zlib.crc32(str(t).encode()) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))
