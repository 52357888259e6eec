"""
Portable 64-bit linear congruential generator for randomized test data.

    state <- (a * state + c) mod 2**64,  a = 6364136223846793005,
                                         c = 1442695040888963407

Uniform doubles in [0, 1) take the top 53 bits of the new state.  The
stream depends only on the seed, so randomized inputs can be reproduced by
any implementation.
"""
from __future__ import annotations

import math

import numpy as np

A = 6364136223846793005
C = 1442695040888963407
MASK = (1 << 64) - 1


class Lcg64:
    def __init__(self, seed: int = 0):
        self.state = int(seed) & MASK

    def next_u64(self) -> int:
        self.state = (A * self.state + C) & MASK
        return self.state

    def uniform(self, size=None, low: float = 0.0, high: float = 1.0):
        """Uniform samples in ``[low, high)``; a float when ``size`` is None."""
        if size is None:
            return low + (high - low) * ((self.next_u64() >> 11) * 2.0 ** -53)
        n = int(np.prod(size))
        vals = np.array([(self.next_u64() >> 11) for _ in range(n)], dtype=float) * 2.0 ** -53
        return (low + (high - low) * vals).reshape(size)

    def normal(self, size=None):
        """Standard normal samples by the Box-Muller transform."""
        n = 1 if size is None else int(np.prod(size))
        m = (n + 1) // 2
        raw = self.uniform(2 * m)
        u1, u2 = 1.0 - raw[0::2], raw[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2 * math.pi * u2), r * np.sin(2 * math.pi * u2)])[:n]
        return float(z[0]) if size is None else z.reshape(size)

    def symmetric(self, d: int, count: int, scale: float = 1.0) -> np.ndarray:
        """``count`` random symmetric d x d matrices with entries of size ``scale``."""
        M = self.uniform((count, d, d), -scale, scale)
        return 0.5 * (M + np.swapaxes(M, -1, -2))

    def general(self, d: int, count: int, scale: float = 1.0) -> np.ndarray:
        return self.uniform((count, d, d), -scale, scale)
