"""Splittable seed derivation.

Every random draw in the package is driven by a ``numpy.random.Generator``
built from a root seed plus a tuple of integer keys, so that independent
components (feature maps, stream segments, Monte-Carlo replicates) never
share a stream and never touch a global RNG.
"""

from __future__ import annotations

import numpy as np


def derive_seed(root: int, *keys: int) -> int:
    """Return a 64-bit child seed of ``root`` addressed by ``keys``."""
    ss = np.random.SeedSequence(int(root), spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def make_rng(root: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(root), spawn_key=tuple(int(k) for k in keys)))
