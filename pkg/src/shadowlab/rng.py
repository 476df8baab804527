"""Deterministic counter-based pseudo-random streams.

Reproducibility contract
------------------------
Every random draw in this package comes from the splitmix64 output
function (an xor-shift/multiply mixer over a 64-bit counter).  A stream
is identified by a 64-bit key; draw ``i`` of stream ``key`` is

    u64(key, i) = mix64((key + (i + 1) * GOLDEN) mod 2**64)

where ``GOLDEN = 0x9E3779B97F4A7C15`` and ``mix64`` is

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9;  (mod 2**64)
    z ^= z >> 27;  z *= 0x94D049BB133111EB;  (mod 2**64)
    z ^= z >> 31.

Uniform doubles in [0, 1) take the top 53 bits: ``(u64 >> 11) * 2**-53``.
Sub-streams (per trajectory, per trial, ...) are derived by folding
indices into the key with the same mixer:

    derive(key, j) = mix64((key ^ mix64((j + 1) * GOLDEN)) + GOLDEN)

Because draws are pure functions of (key, i), results are bit-identical
across runs, platforms, and any parallel scheduling of consumers.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """splitmix64 finalizer on a Python int (mod 2**64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive(key: int, *indices: int) -> int:
    """Fold integer indices into ``key``, producing an independent stream key."""
    k = key & _MASK
    for j in indices:
        k = mix64(((k ^ mix64(((j + 1) * _GOLDEN) & _MASK)) + _GOLDEN) & _MASK)
    return k


class Stream:
    """Counter-based uniform stream; draw ``i`` is independent of all others."""

    __slots__ = ("key", "_next")

    def __init__(self, key: int):
        self.key = key & _MASK
        self._next = 0

    def u64(self, i: int) -> int:
        return mix64((self.key + ((i + 1) * _GOLDEN)) & _MASK)

    def uniform(self, i: int) -> float:
        """Draw ``i`` as a double in [0, 1)."""
        return (self.u64(i) >> 11) * 2.0**-53

    def next_uniform(self) -> float:
        """Sequential convenience wrapper around :meth:`uniform`."""
        u = self.uniform(self._next)
        self._next += 1
        return u

    def uniforms(self, start: int, count: int) -> np.ndarray:
        """Vectorized draws ``start .. start+count-1`` as float64 in [0, 1)."""
        idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
        z = (np.uint64(self.key) + idx * np.uint64(_GOLDEN)).astype(np.uint64)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX1)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX2)
        z ^= z >> np.uint64(31)
        return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53
