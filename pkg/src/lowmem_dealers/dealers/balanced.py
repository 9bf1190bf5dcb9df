"""Uniform random balanced bit strings (n ones, n zeros) from O(log n) state."""
from fractions import Fraction

import numpy as np
from numba import njit

from ..wordops import RandomSource, uniform_k


@njit(cache=True)
def balanced_bit_k(rs, n, t, ones):
    # bit t (1-based) is 1 with probability (n - ones) / (2n - t + 1)
    return 1 if uniform_k(rs, 2 * n - t + 1) <= n - ones else 0


@njit(cache=True)
def balanced_strings_k(rs, n, count, out):
    """Fill out[count] with balanced strings packed as integers (bit t-1 = bit t)."""
    for s in range(count):
        ones = 0
        word = 0
        for t in range(1, 2 * n + 1):
            b = balanced_bit_k(rs, n, t, ones)
            ones += b
            word |= b << (t - 1)
        out[s] = word


class BalancedBits:
    """Emits 2n bits, exactly n of them ones, every such string equally likely.

    State is the turn t and the number of ones k emitted so far.
    """

    def __init__(self, n: int):
        if n < 0:
            raise ValueError("n must be non-negative")
        self.n = n
        self.t = 0
        self.ones = 0

    def next_bit(self, src: RandomSource) -> int:
        if self.t >= 2 * self.n:
            raise StopIteration("all 2n bits emitted")
        self.t += 1
        b = int(balanced_bit_k(src.state, self.n, self.t, self.ones))
        self.ones += b
        return b

    def one_probability(self) -> Fraction:
        """Probability that the next bit is 1."""
        return Fraction(self.n - self.ones, 2 * self.n - self.t)


def balanced_bit(state: BalancedBits, src: RandomSource) -> int:
    return state.next_bit(src)


def string_probability(bits) -> Fraction:
    """Exact probability of emitting ``bits`` (product of per-bit laws)."""
    n = len(bits) // 2
    p = Fraction(1)
    ones = 0
    for t, b in enumerate(bits, start=1):
        q = Fraction(n - ones, 2 * n - t + 1)
        p *= q if b else 1 - q
        ones += b
    return p


def sample_strings(n: int, count: int, src: RandomSource) -> np.ndarray:
    out = np.zeros(count, dtype=np.int64)
    balanced_strings_k(src.state, n, count, out)
    return out
