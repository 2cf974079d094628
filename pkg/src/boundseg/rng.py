"""Deterministic PRNG used everywhere randomness is needed.

The generator is splitmix64: the i-th output of a stream seeded with s is
mix64(s + i * GAMMA) (wrapping 64-bit arithmetic), so scalar draws and
vectorized batch draws produce the identical stream. Uniform doubles take
the top 53 bits; Gaussians come from Box-Muller applied to consecutive
uniform pairs. This keeps synthetic data and parameter initialization
bit-reproducible across platforms and implementations.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_U53 = 1.0 / float(1 << 53)


def _mix64_scalar(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def _mix64_vec(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Counter-based splitmix64 stream over a 64-bit state."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_uint64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return _mix64_scalar(self._state)

    def uniform(self) -> float:
        """One double in [0, 1)."""
        return (self.next_uint64() >> 11) * _U53

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles in [0, 1); identical to n successive uniform() calls."""
        idx = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = _mix64_vec(np.uint64(self._state) + idx * np.uint64(_GAMMA))
        self._state = (self._state + n * _GAMMA) & _MASK
        return (z >> np.uint64(11)).astype(np.float64) * _U53

    def gaussians(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller on consecutive uniform pairs.

        Consumes 2*ceil(n/2) uniforms; a leftover half-pair is discarded.
        A zero uniform is clamped to 2^-53 before the log.
        """
        m = (n + 1) // 2
        u = self.uniforms(2 * m)
        u1 = np.maximum(u[0::2], _U53)
        u2 = u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * m)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return out[:n]

    def below(self, n: int) -> int:
        """Integer in [0, n) by modulo reduction (bias < 2^-53 for desk-scale n)."""
        return self.next_uint64() % n

    def shuffled(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n)."""
        order = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order
