"""Seedable xoshiro256** generator used by the Monte Carlo kernel.

Streams are derived from integer keys (base seed, temperature index, sample
index, ...) through :class:`numpy.random.SeedSequence`, which hashes the key
into the 256-bit xoshiro state. The generator itself is small enough to live
inside numba-compiled loops, so the draw sequence is identical on every
platform.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def derive_state(*key: int) -> np.ndarray:
    """Return a fresh 4-word xoshiro256** state for an integer key."""
    if not key:
        raise ValueError("at least one key component is required")
    for k in key:
        if int(k) < 0:
            raise ValueError(f"key components must be non-negative, got {k}")
    seq = np.random.SeedSequence([int(k) for k in key])
    state = seq.generate_state(4, dtype=np.uint64)
    if not state.any():  # all-zero state is a fixed point
        state[0] = np.uint64(0x9E3779B97F4A7C15)
    return state


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@njit(cache=True)
def next_u64(s):
    """Advance ``s`` in place and return the next 64-bit output."""
    result = _rotl(s[1] * np.uint64(5), 7) * np.uint64(9)
    t = s[1] << np.uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@njit(cache=True)
def next_double(s):
    """Uniform double in [0, 1) from the top 53 bits."""
    return float(next_u64(s) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def next_below(s, bound):
    """Integer in [0, bound) by 32-bit multiply-shift; ``bound`` < 2**32."""
    hi = next_u64(s) >> np.uint64(32)
    return int((hi * np.uint64(bound)) >> np.uint64(32))


class Xoshiro256:
    """Python-side handle on a xoshiro256** stream (mostly for tests)."""

    def __init__(self, *key: int):
        self.state = derive_state(*key)

    def random_raw(self, size: int) -> np.ndarray:
        return _fill_raw(self.state, size)

    def random(self, size: int) -> np.ndarray:
        return _fill_double(self.state, size)


@njit(cache=True)
def _fill_raw(s, size):
    out = np.empty(size, dtype=np.uint64)
    for i in range(size):
        out[i] = next_u64(s)
    return out


@njit(cache=True)
def _fill_double(s, size):
    out = np.empty(size, dtype=np.float64)
    for i in range(size):
        out[i] = next_double(s)
    return out
