"""Seeded 64-bit pseudo-random source shared by the Python engine and the compiled kernels.

The generator is xoshiro256** with its 256-bit state filled from splitmix64, the
seeding procedure recommended by the xoshiro authors. Both algorithms are small,
published and easy to reproduce in any language, so run outputs can be checked
against other implementations given only the seed.
"""

from __future__ import annotations

import numpy as np
from numba import njit

ALGORITHM = "xoshiro256**/splitmix64"

MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x: int) -> tuple[int, int]:
    """Advance a splitmix64 state; returns ``(new_state, output)``."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, z ^ (z >> 31)


def mix64(x: int) -> int:
    return splitmix64(x & MASK64)[1]


def derive_seed(seed_base: int, n: int, trial: int) -> int:
    """Per-trial seed: the base seed xor a hash of ``(n, trial)``.

    Mixing (rather than ``seed_base + trial``) keeps trial streams unrelated.
    """
    return (seed_base ^ mix64(mix64(n) ^ trial)) & MASK64


def seed_state(seed: int) -> np.ndarray:
    state = np.zeros(4, dtype=np.uint64)
    x = seed & MASK64
    for k in range(4):
        x, out = splitmix64(x)
        state[k] = out
    return state


@njit(inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def next_u64(st):
    s0 = st[0]
    s1 = st[1]
    s2 = st[2]
    s3 = st[3]
    result = _rotl(s1 * np.uint64(5), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, 45)
    st[0] = s0
    st[1] = s1
    st[2] = s2
    st[3] = s3
    return result


@njit(cache=True)
def below_shift(n):
    """Right shift that keeps just enough high bits to cover ``0..n-1`` (n >= 2)."""
    bits = 0
    m = n - 1
    while m > 0:
        bits += 1
        m >>= 1
    return 64 - bits


@njit(cache=True)
def uniform_below(st, n, shift):
    # masked rejection: exact uniformity, fewer than two draws on average
    while True:
        x = np.int64(next_u64(st) >> np.uint64(shift))
        if x < n:
            return x


@njit(cache=True)
def select_pair(st, n, shift):
    i = uniform_below(st, n, shift)
    j = uniform_below(st, n, shift)
    while j == i:
        j = uniform_below(st, n, shift)
    return i, j


class Rng:
    """Python handle on a generator state; the state array is what kernels consume."""

    algorithm = ALGORITHM

    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.state = seed_state(self.seed)

    def next_u64(self) -> int:
        return int(next_u64(self.state))

    def below(self, n: int) -> int:
        return int(uniform_below(self.state, n, below_shift(n)))

    def pair(self, n: int) -> tuple[int, int]:
        i, j = select_pair(self.state, n, below_shift(n))
        return int(i), int(j)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed:#x})"
