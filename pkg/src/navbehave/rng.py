"""Seed-derived random streams.

Every stochastic step in the package draws from a stream keyed by
``(seed, *key)``, so results never depend on call order or worker layout.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def seed_sequence(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed) & MASK64, spawn_key=tuple(int(k) for k in key))


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream addressed by ``key``."""
    return np.random.default_rng(seed_sequence(seed, *key))


def child(root: np.random.SeedSequence, *key: int) -> np.random.Generator:
    # SeedSequence.spawn() is stateful; build the child key explicitly instead.
    ss = np.random.SeedSequence(root.entropy, spawn_key=tuple(root.spawn_key) + tuple(key))
    return np.random.default_rng(ss)


def derive_seed(seed: int, *key: int) -> int:
    """A 64-bit integer seed for the stream addressed by ``key``."""
    lo, hi = seed_sequence(seed, *key).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)
