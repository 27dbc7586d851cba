"""Counter-style deterministic random stream shared by the simulation paths.

Each trial owns one stream, keyed by ``(seed, trial_index)``.  Trials never
share state, so results do not depend on scheduling or worker count.  The
generator is a SplitMix64 sequence (Steele/Vigna finalizer); draws happen in a
fixed, documented order inside a trial, which makes whole trials replayable
bit-for-bit.

All functions are numba-compiled and callable both from the interpreter (the
reference trial loop, unit tests) and from inside the jitted simulation
kernel, so the two paths consume identical numbers.
"""

import math

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SALT = np.uint64(0xD6E8FEB86659FD93)
_INV53 = 1.1102230246251565e-16  # 2**-53
_TWO_PI = 6.283185307179586


@njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def stream_init(seed, trial_index):
    """Initial stream state for one trial; distinct trials get distinct,
    well-separated states."""
    s = np.uint64(seed) ^ _SALT
    return _mix64(s + _GOLDEN * (np.uint64(trial_index) + np.uint64(1)))


@njit(cache=True, inline="always")
def next_uniform(st):
    """Uniform draw in the open interval (0, 1); advances st[0] in place."""
    st[0] = st[0] + _GOLDEN
    z = _mix64(st[0])
    return (np.float64(z >> np.uint64(11)) + 0.5) * _INV53


@njit(cache=True, inline="always")
def next_normal(st):
    """Standard normal via Box-Muller; consumes exactly two uniforms."""
    u1 = next_uniform(st)
    u2 = next_uniform(st)
    return math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)


class TrialStream:
    """Thin Python handle over the jitted stream, for the reference path."""

    def __init__(self, seed: int, trial_index: int = 0):
        self._state = np.empty(1, np.uint64)
        self._state[0] = stream_init(seed, trial_index)

    def uniform(self) -> float:
        return next_uniform(self._state)

    def normal(self) -> float:
        return next_normal(self._state)

    def exponential(self, rate: float) -> float:
        return -math.log(self.uniform()) / rate

    def randint(self, n: int) -> int:
        """Integer uniform on {0, ..., n-1}; consumes one uniform."""
        k = int(self.uniform() * n)
        return n - 1 if k >= n else k
