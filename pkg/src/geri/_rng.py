"""Counter-based random streams usable from both Python and numba kernels.

Walk generation and negative sampling draw from splitmix64 streams keyed by
(seed, iteration, start node), so a walk's randomness does not depend on
which worker produced it or in what order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _finalize(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def mix_seed(seed, a, b):
    """Derive a stream state from a base seed and two integer keys."""
    z = _finalize(np.uint64(seed) + _GOLDEN)
    z = _finalize(z ^ (np.uint64(a) * _GOLDEN + np.uint64(1)))
    z = _finalize(z ^ (np.uint64(b) * _GOLDEN + np.uint64(2)))
    return z


@njit(cache=True, inline="always")
def next_u64(state):
    # state is a length-1 uint64 array, advanced in place
    state[0] += _GOLDEN
    return _finalize(state[0])


@njit(cache=True, inline="always")
def next_float(state):
    """Uniform double in [0, 1)."""
    return float(next_u64(state) >> np.uint64(11)) * _INV_2_53


@njit(cache=True, inline="always")
def next_index(state, n):
    """Uniform integer in [0, n)."""
    i = int(next_float(state) * n)
    return i if i < n else n - 1


def make_state(seed: int, a: int = 0, b: int = 0) -> np.ndarray:
    return np.array([mix_seed(np.uint64(seed % 2**64), a, b)], dtype=np.uint64)


def sub_seed(seed: int, tag: str) -> int:
    """Stable sub-seed for one pipeline component (walks, init, splits, ...)."""
    words = [seed % 2**32, seed // 2**32 % 2**32] + [ord(c) for c in tag]
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint64)[0])
