"""Pinned hashing and pseudo-random primitives.

Both are specified bit-for-bit so that indexes, subsets and sampled neighbor
picks are reproducible from any implementation, not just this one.
"""
from __future__ import annotations

from typing import Sequence

MASK64 = 0xFFFFFFFFFFFFFFFF
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes, seed: int = 0) -> int:
    h = (FNV_OFFSET ^ seed) & MASK64
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK64
    return h


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Value in [0, n); plain modulo, the bias is irrelevant at these sizes."""
        return self.next() % n


def keyed(seed: int, key: str) -> SplitMix64:
    """Generator keyed by (seed, key), independent of call order."""
    return SplitMix64(seed ^ fnv1a64(key.encode("utf-8")))


def shuffled_indices(n: int, rng: SplitMix64) -> list[int]:
    """Fisher-Yates over range(n), swapping from the top down."""
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        order[i], order[j] = order[j], order[i]
    return order


def sample_positions(n: int, k: int, rng: SplitMix64) -> list[int]:
    """k distinct positions from range(n), returned in ascending order."""
    k = min(k, n)
    pool = list(range(n))
    for i in range(k):
        j = i + rng.below(n - i)
        pool[i], pool[j] = pool[j], pool[i]
    return sorted(pool[:k])


def pick(items: Sequence, k: int, rng: SplitMix64) -> list:
    return [items[i] for i in sample_positions(len(items), k, rng)]
