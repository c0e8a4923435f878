"""splitmix64 streams for numba kernels; state is a uint64 threaded through calls."""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@njit(inline="always")
def next_u64(state):
    state = state + _GOLDEN
    z = state
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return state, z ^ (z >> np.uint64(31))


@njit(inline="always")
def uniform(state):
    state, z = next_u64(state)
    return state, float(z >> np.uint64(11)) * _INV53


@njit(inline="always")
def randint(state, n):
    state, u = uniform(state)
    k = int(u * n)
    return state, min(k, n - 1)


@njit(inline="always")
def stream(seed, key):
    """Independent state for (seed, key)."""
    state = np.uint64(seed) ^ (np.uint64(key) * _M2)
    state, z = next_u64(state)
    state, z = next_u64(state ^ z)
    return state
