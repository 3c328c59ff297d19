"""Counter-based random number streams.

Every randomized operation in this package draws from a `Stream` keyed by
``(seed, index, lane)``.  A Monte Carlo trial with index ``i`` derives its
own streams, so results are reproducible bit for bit no matter how trials
are chunked across workers.  The compiled kernels implement the exact same
generator (xoshiro256++ seeded via splitmix64), which lets the test suite
check the two backends against each other at the level of individual draws.

Lanes separate randomness by role: tree structure draws and car arrival
draws never share a stream, so fusing or reordering the two inside a kernel
cannot change the outcome of a trial.
"""

from __future__ import annotations

import math

_M64 = (1 << 64) - 1

# Lane identifiers for derive_key. Lane 0 is reserved for top-level use.
LANE_MAIN = 0
LANE_STRUCTURE = 1
LANE_ARRIVAL = 2

_INDEX_SALT = 0xA24BAED4963EE407
_LANE_SALT = 0x9FB21C651E98DF25
_INV_2_53 = 1.0 / 9007199254740992.0  # 2**-53


def mix64(z: int) -> int:
    """Finalizer of splitmix64: a 64-bit bijective avalanche mix."""
    z &= _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def derive_key(seed: int, index: int, lane: int) -> int:
    """Derive the 64-bit stream key for (seed, trial index, lane)."""
    h = seed & _M64
    h = mix64(h ^ ((index * _INDEX_SALT) & _M64))
    h = mix64(h ^ ((lane * _LANE_SALT) & _M64))
    return h


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _M64


class Stream:
    """xoshiro256++ generator with a shared bit buffer for cheap coin flips.

    The bit buffer refills from ``next_u64`` and is consumed LSB first.
    A refill discards any leftover bits, so the draw sequence depends only
    on the sequence of primitive calls, never on buffer phase arithmetic.
    """

    __slots__ = ("s0", "s1", "s2", "s3", "_bits", "_nbits")

    def __init__(self, key: int):
        # Seed the four state words from splitmix64 as recommended upstream.
        state = key & _M64
        words = []
        for _ in range(4):
            state = (state + 0x9E3779B97F4A7C15) & _M64
            words.append(mix64(state))
        if not any(words):  # all-zero state is invalid for xoshiro
            words[0] = 1
        self.s0, self.s1, self.s2, self.s3 = words
        self._bits = 0
        self._nbits = 0

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s0, self.s1, self.s2, self.s3
        result = (_rotl((s0 + s3) & _M64, 23) + s0) & _M64
        t = (s1 << 17) & _M64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self.s0, self.s1, self.s2, self.s3 = s0, s1, s2, s3
        return result

    def next_bit(self) -> int:
        if self._nbits < 1:
            self._bits = self.next_u64()
            self._nbits = 64
        b = self._bits & 1
        self._bits >>= 1
        self._nbits -= 1
        return b

    def next_two_bits(self) -> int:
        if self._nbits < 2:
            self._bits = self.next_u64()
            self._nbits = 64
        f = self._bits & 3
        self._bits >>= 2
        self._nbits -= 2
        return f

    def uniform(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * _INV_2_53

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by Lemire's unbiased method."""
        x = self.next_u64()
        m = x * n
        low = m & _M64
        if low < n:
            threshold = (1 << 64) % n
            while low < threshold:
                x = self.next_u64()
                m = x * n
                low = m & _M64
        return m >> 64

    def poisson(self, exp_neg_lambda: float) -> int:
        """Poisson sample by Knuth's product method.

        ``exp_neg_lambda`` is exp(-mean), precomputed by the caller.  Cost is
        one uniform per unit of mean, which is fine for the arrival rates
        used here (well below 30).
        """
        k = 0
        p = 1.0
        while True:
            p *= self.uniform()
            if p <= exp_neg_lambda:
                return k
            k += 1


def poisson_mean_to_threshold(alpha: float) -> float:
    """exp(-alpha), the acceptance threshold used by Stream.poisson."""
    if alpha < 0:
        raise ValueError(f"arrival rate must be nonnegative, got {alpha}")
    return math.exp(-alpha)
