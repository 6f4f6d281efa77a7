"""Counter-based random numbers for reproducible parallel Monte Carlo.

Every draw is a pure function of (key, counter), where the key itself is a
pure function of (base seed, stream index).  Results therefore never depend
on thread scheduling, and any draw can be regenerated in isolation.  The
generator is SplitMix64 evaluated in counter mode: the k-th state of a
SplitMix64 sequence is seed + k * GAMMA, so indexing states directly gives
random access to the stream.
"""
from __future__ import annotations

import numpy as np
from numba import njit

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def stream_key(base_seed, stream):
    """Key for an independent substream (path index, particle index, ...)."""
    return mix64(mix64(np.uint64(base_seed)) ^ (np.uint64(stream) * GAMMA + GAMMA))


@njit(cache=True, inline="always")
def u01(key, counter):
    """Uniform draw in (0, 1], the counter-th element of the keyed stream."""
    x = mix64(key + np.uint64(counter) * GAMMA)
    return ((x >> np.uint64(11)) + np.uint64(1)) * _INV53


@njit(cache=True, inline="always")
def exp1(key, counter):
    """Standard exponential draw."""
    return -np.log(u01(key, counter))


class CounterStream:
    """Stateful convenience wrapper over the counter-based draws.

    Mirrors exactly what the jitted kernels do internally, so a Python-level
    consumer and a kernel given the same (seed, stream) see the same numbers.
    """

    def __init__(self, base_seed, stream=0):
        self.key = np.uint64(stream_key(np.uint64(base_seed), np.uint64(stream)))
        self.counter = 0

    def uniform(self):
        x = u01(self.key, self.counter)
        self.counter += 1
        return x

    def exponential(self):
        x = exp1(self.key, self.counter)
        self.counter += 1
        return x
