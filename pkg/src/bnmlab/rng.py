"""Deterministic pseudo-random streams: splitmix64 seeding xoshiro256++.

Both generators are specified purely in terms of 64-bit integer arithmetic,
so every stream is reproducible bit-for-bit across platforms and across
implementation languages. Gaussian variates use the Box-Muller transform,
which keeps the double-precision results portable as well.
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_TWO_PI = 2.0 * math.pi


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a splitmix64 state once; returns (new_state, output)."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """The index-th output of the splitmix64 sequence started at master.

    Used to split one master seed into independent purpose-specific seeds
    (data generation, batch sampling, parameter init, ...) so that consuming
    one stream can never shift another.
    """
    if index < 0:
        raise ValueError("index must be >= 0")
    state = master & _MASK64
    out = 0
    for _ in range(index + 1):
        state, out = splitmix64(state)
    return out


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256pp:
    """xoshiro256++ stream; state initialised from the seed via splitmix64."""

    __slots__ = ("_s0", "_s1", "_s2", "_s3")

    def __init__(self, seed: int):
        state = seed & _MASK64
        state, self._s0 = splitmix64(state)
        state, self._s1 = splitmix64(state)
        state, self._s2 = splitmix64(state)
        _, self._s3 = splitmix64(state)

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s0, self._s1, self._s2, self._s3
        result = (_rotl((s0 + s3) & _MASK64, 23) + s0) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s0, self._s1, self._s2, self._s3 = s0, s1, s2, s3
        return result

    def next_float(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def next_below(self, n: int) -> int:
        """Uniform integer in [0, n) via the multiply-shift reduction."""
        if n <= 0:
            raise ValueError("n must be positive")
        return (self.next_u64() * n) >> 64

    def next_gauss_pair(self) -> tuple[float, float]:
        """Two independent standard normals (Box-Muller).

        Consumes exactly two 64-bit draws. 1 - u keeps the logarithm's
        argument in (0, 1].
        """
        u1 = 1.0 - self.next_float()
        u2 = self.next_float()
        r = math.sqrt(-2.0 * math.log(u1))
        return r * math.cos(_TWO_PI * u2), r * math.sin(_TWO_PI * u2)


def stream(master: int, purpose: int) -> Xoshiro256pp:
    """A xoshiro256++ stream seeded with derive_seed(master, purpose)."""
    return Xoshiro256pp(derive_seed(master, purpose))


# Purpose indices shared by the trainer and the CLI so that every component
# derives the same streams from one master seed.
STREAM_INIT = 0
STREAM_BATCH = 1
STREAM_EVAL = 2
