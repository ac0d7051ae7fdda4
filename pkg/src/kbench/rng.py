"""Portable counter-based pseudorandom numbers.

Every draw is ``splitmix64(seed + (counter + 1) * GOLDEN)``, so a stream is
fully determined by its 64-bit seed and position and is bit-identical on any
platform with IEEE doubles. Uniforms use the top 53 bits.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, counters: np.ndarray) -> np.ndarray:
    """Hash ``counters`` under ``seed``; returns uint64 of the same shape."""
    counters = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + (counters + np.uint64(1)) * _GOLDEN
        return _mix(z)


def derive_seed(seed: int, *keys: int | float | str) -> int:
    """Derive an independent child seed from ``seed`` and a key path."""
    state = seed & _MASK64
    for key in keys:
        if isinstance(key, str):
            code = int.from_bytes(key.encode("utf-8")[:32].ljust(32, b"\0"), "little")
            parts = [(code >> (64 * i)) & _MASK64 for i in range(4)]
        elif isinstance(key, float):
            parts = [int(np.float64(key).view(np.uint64))]
        else:
            parts = [key & _MASK64]
        for part in parts:
            state = int(splitmix64(state ^ part, np.zeros(1, dtype=np.uint64))[0])
    return state


class CounterRNG:
    """Sequential view over a counter-based stream."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def raw(self, n: int) -> np.ndarray:
        idx = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        return splitmix64(self.seed, idx)

    def uniform(self, size=None, low: float = 0.0, high: float = 1.0):
        n = int(np.prod(size)) if size is not None else 1
        u = (self.raw(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53
        u = low + (high - low) * u
        return float(u[0]) if size is None else u.reshape(size)

    def normal(self, size=None):
        """Standard normals by Box-Muller (two uniforms per draw)."""
        n = int(np.prod(size)) if size is not None else 1
        u1 = self.uniform(n)
        u2 = self.uniform(n)
        z = np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)
        return float(z[0]) if size is None else z.reshape(size)
