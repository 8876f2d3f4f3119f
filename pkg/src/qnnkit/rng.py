"""Deterministic random-number streams.

Every stochastic routine in the package derives its randomness from a single
integer seed through a fixed hierarchy: ``stream(seed, tag, *indices)`` keys a
counter-based Philox generator with the experiment seed, a module tag, and any
number of integer stream indices (sample index, qubit index, shift point).
Streams with distinct keys are independent, and the derivation does not depend
on execution order or thread count.
"""

from __future__ import annotations

import zlib

import numpy as np

__all__ = ["stream", "as_seed"]


def _tag_word(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, tag: str, *indices: int) -> np.random.Generator:
    """Philox generator keyed by (seed, tag, indices)."""
    words = [seed & 0xFFFFFFFFFFFFFFFF, _tag_word(tag)] + [i & 0xFFFFFFFFFFFFFFFF for i in indices]
    # Philox wants exactly 2 64-bit key words; fold extra indices in.
    folded = [0, 0]
    for j, w in enumerate(words):
        folded[j % 2] ^= (w * (0x9E3779B97F4A7C15 + 2 * (j // 2) + 1)) & 0xFFFFFFFFFFFFFFFF
    return np.random.Generator(np.random.Philox(key=np.array(folded, dtype=np.uint64)))


def as_seed(rng_or_seed) -> int:
    """Coerce an int seed or Generator into an int seed for stream derivation."""
    if isinstance(rng_or_seed, (int, np.integer)):
        return int(rng_or_seed)
    if isinstance(rng_or_seed, np.random.Generator):
        return int(rng_or_seed.integers(0, 2**63 - 1))
    raise TypeError(f"expected int seed or numpy Generator, got {type(rng_or_seed)!r}")
