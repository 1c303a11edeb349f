"""Seeded pseudo-randomness for the interaction scheduler.

A single xoshiro256** stream drives every random decision in a run: pair
selection and the one probabilistic transition branch (clock drips).  The
same jitted primitives are called from both the interpreted single-step
path and the compiled run loop, so a (seed, inputs, params) triple fully
determines the interaction sequence regardless of which path executes it.
"""

from __future__ import annotations

import numpy as np
from numba import int64, njit, uint64

__all__ = [
    "seed_state",
    "spawn_seed",
    "next_u64",
    "rand_below",
    "rand_pair",
    "bernoulli_threshold",
    "PROB_BITS",
]

# Resolution of probability thresholds for randomized transitions.
PROB_BITS = 53

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True)
def _splitmix64(x):
    x = uint64(x + _GOLDEN)
    z = x
    z = uint64((z ^ (z >> uint64(30))) * _MIX1)
    z = uint64((z ^ (z >> uint64(27))) * _MIX2)
    return uint64(z ^ (z >> uint64(31))), x


_MASK = 0xFFFFFFFFFFFFFFFF


def seed_state(seed: int) -> np.ndarray:
    """Expand a 64-bit seed into a xoshiro256** state (splitmix64 seeding)."""
    state = np.empty(4, dtype=np.uint64)
    x = seed & _MASK
    for i in range(4):
        out, x = _splitmix64(np.uint64(x))
        state[i] = out
    # xoshiro must not start at the all-zero state
    if not state.any():
        state[0] = _GOLDEN
    return state


def spawn_seed(base_seed: int, index: int) -> int:
    """Derive the seed for trial `index` from a base seed, deterministically."""
    mix = ((base_seed & _MASK) ^ ((index + 1) * int(_GOLDEN))) & _MASK
    out, _ = _splitmix64(np.uint64(mix))
    return int(out)


@njit(cache=True, inline="always")
def _rotl(x, k):
    return uint64((x << k) | (x >> (uint64(64) - k)))


@njit(cache=True, inline="always")
def next_u64(s):
    """Advance the xoshiro256** state array in place; return 64 random bits."""
    result = uint64(_rotl(uint64(s[1] * uint64(5)), uint64(7)) * uint64(9))
    t = uint64(s[1] << uint64(17))
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], uint64(45))
    return result


@njit(cache=True, inline="always")
def rand_below(s, n):
    """Uniform integer in [0, n).

    Plain modulo reduction: the bias is ~n/2**64, far below anything the
    statistical checks in this package could resolve.
    """
    return int64(next_u64(s) % uint64(n))


@njit(cache=True, inline="always")
def rand_pair(s, n):
    """Uniformly random unordered pair of distinct agent indices.

    Drawn as an ordered pair (i, j); protocols are symmetric up to
    multiset outcome, so the order only fixes which agent receives which
    side of the outcome.
    """
    i = int64(next_u64(s) % uint64(n))
    j = int64(next_u64(s) % uint64(n - 1))
    if j >= i:
        j += 1
    return i, j


def bernoulli_threshold(p: float) -> int:
    """Threshold t such that (next_u64 >> 11) < t fires with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability out of range: {p}")
    return min(int(round(p * (1 << PROB_BITS))), 1 << PROB_BITS)


@njit(cache=True, inline="always")
def bernoulli(s, threshold):
    """Draw one Bernoulli variate with the given 53-bit threshold."""
    return (next_u64(s) >> uint64(64 - PROB_BITS)) < uint64(threshold)
