"""Per-replicate random streams.

Replicate ``r`` of seed ``s`` owns the Philox stream whose key is derived from
``s`` and whose counter starts at ``r`` in the third 64-bit word. Streams never
overlap (each has 2**128 blocks to itself) and depend on nothing but
``(seed, replicate)``, so ensembles are independent of ordering and of the
number of workers.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

_MASK64 = (1 << 64) - 1


@lru_cache(maxsize=64)
def _key(seed: int) -> tuple[int, int]:
    if not 0 <= seed <= _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    state = np.random.SeedSequence(seed).generate_state(2, np.uint64)
    return int(state[0]), int(state[1])


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Generator for replicate ``replicate`` of ``seed``."""
    if replicate < 0:
        raise ValueError("replicate index must be nonnegative")
    key = np.array(_key(int(seed)), dtype=np.uint64)
    counter = np.array([0, 0, replicate & _MASK64, replicate >> 64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def aux_rng(seed: int, tag: int) -> np.random.Generator:
    """Stream for auxiliary Monte-Carlo work, disjoint from every replicate stream."""
    key = np.array(_key(int(seed)), dtype=np.uint64)
    counter = np.array([0, 0, 0, (1 << 63) | (tag & ((1 << 63) - 1))], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
