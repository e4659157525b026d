"""Counter-based uniform streams.

A stream is identified by a 64-bit key derived from ``(seed, *ids)``; draw
number ``i`` is ``splitmix64(key + (i + 1) * GOLDEN)``, so any draw of any
stream can be produced without touching the others.  The same arithmetic is
compiled with numba for the bulk Monte Carlo kernels, and the two must agree
bit for bit.
"""

from __future__ import annotations

import numba as nb
import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *ids: int) -> int:
    k = mix64((seed & MASK64) + GOLDEN)
    for i in ids:
        k = mix64(k ^ mix64((i & MASK64) + GOLDEN))
    return k


def uniform_at(key: int, counter: int) -> float:
    """Draw ``counter`` (0-based) of stream ``key`` as a double in [0, 1)."""
    return (mix64(key + (counter + 1) * GOLDEN) >> 11) * _INV53


class CounterStream:
    """Sequential view of one keyed stream."""

    def __init__(self, seed: int, *ids: int):
        self.key = derive_key(seed, *ids)
        self.counter = 0

    def uniform(self) -> float:
        u = uniform_at(self.key, self.counter)
        self.counter += 1
        return u

    def __repr__(self):
        return f"CounterStream(key={self.key:#018x}, counter={self.counter})"


# --- numba twins -----------------------------------------------------------

_U_GOLDEN = np.uint64(GOLDEN)
_U_M1 = np.uint64(_M1)
_U_M2 = np.uint64(_M2)


@nb.njit(cache=True, inline="always")
def nb_mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _U_M1
    z = (z ^ (z >> np.uint64(27))) * _U_M2
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True, inline="always")
def nb_uniform_at(key, counter):
    z = nb_mix64(key + (np.uint64(counter) + np.uint64(1)) * _U_GOLDEN)
    return np.float64(z >> np.uint64(11)) * _INV53


@nb.njit(cache=True, inline="always")
def nb_derive_key2(base, i):
    # equals derive_key(seed, *ids, i) when base = derive_key(seed, *ids)
    return nb_mix64(base ^ nb_mix64(np.uint64(i) + _U_GOLDEN))
