"""Deterministic counter-based random number generation.

A SplitMix64 stream: 64-bit state advanced by a fixed odd increment, with
the output mix applied to each counter value. The same seed and call
sequence produce bitwise-identical scalars on every platform. Bulk draws
are vectorized over the counter and consume exactly as many counter steps
as the equivalent sequence of single draws.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_TWO53 = float(1 << 53)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 generator: `seed` fixes the stream, calls advance a counter."""

    def __init__(self, seed: int) -> None:
        self._state = int(seed) & _MASK64

    @property
    def state(self) -> int:
        return self._state

    def raw(self, n: int) -> np.ndarray:
        """Next `n` raw 64-bit outputs as a uint64 array."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        counters = steps + np.uint64(self._state)  # wraps mod 2**64
        self._state = (self._state + n * _GAMMA) & _MASK64
        return _mix(counters)

    def next_uint64(self) -> int:
        return int(self.raw(1)[0])

    def uniform(self, size=None, low: float = 0.0, high: float = 1.0):
        """Doubles in [low, high) with 53-bit resolution."""
        n = 1 if size is None else int(np.prod(size))
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) / _TWO53
        out = low + u * (high - low)
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def normal(self, size=None, mean: float = 0.0, std: float = 1.0):
        """Gaussian draws via Box-Muller on counter pairs."""
        n = 1 if size is None else int(np.prod(size))
        m = (n + 1) // 2
        u1 = ((self.raw(m) >> np.uint64(11)).astype(np.float64) + 1.0) / _TWO53  # (0, 1]
        u2 = (self.raw(m) >> np.uint64(11)).astype(np.float64) / _TWO53
        r = np.sqrt(-2.0 * np.log(u1))
        theta = (2.0 * math.pi) * u2
        pair = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        out = mean + std * pair
        if size is None:
            return float(out[0])
        return out.reshape(size)

    def randbelow(self, n: int) -> int:
        """Integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return min(int(self.uniform() * n), n - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        idx = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx

    def choice(self, n: int, k: int) -> np.ndarray:
        """`k` distinct indices from range(n), drawn without replacement."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        idx = np.arange(n)
        for i in range(k):
            j = i + self.randbelow(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k].copy()

    def split(self) -> "Rng":
        """Derive an independent child stream."""
        return Rng(self.next_uint64())
