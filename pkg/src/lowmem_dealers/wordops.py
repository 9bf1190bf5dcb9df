"""Word-level bit primitives and exact bounded uniform sampling.

Bit positions are numbered 1..w from the least significant end. The
compiled helpers (suffix ``_k``) operate on ``np.uint64`` words and are
shared by every kernel in the package; the plain functions are the
Python-facing surface.
"""
import numpy as np
from numba import njit
from numba.cpython.unsafe.numbers import leading_zeros, trailing_zeros

# Compiled kernels never allocate, so reference counting is switched off: with
# it on, every array argument costs atomic increments on each call. Small
# functions on the sampling path are also inlined at the IR level ("hot");
# inlining the large mutators as well makes compile times explode.
kernel = njit(cache=True, _nrt=False)
hot = njit(cache=True, _nrt=False, inline="always")

W = 64
MASK64 = (1 << W) - 1

_U1 = np.uint64(1)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_SM1 = np.uint64(0xBF58476D1CE4E5B9)
_SM2 = np.uint64(0x94D049BB133111EB)


def _byte_tables():
    pop = np.zeros(256, dtype=np.uint8)
    sel = np.zeros((256, 8), dtype=np.uint8)
    for b in range(256):
        k = 0
        for i in range(8):
            if b >> i & 1:
                sel[b, k] = i + 1
                k += 1
        pop[b] = k
    return pop, sel


POP8, SELECT8 = _byte_tables()


class ContractError(ValueError):
    """A precondition of a primitive was violated."""


class NoSuchBitError(ContractError):
    pass


# compiled primitives ---------------------------------------------------

@hot
def popcount_k(x):
    x = x - ((x >> _U1) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return np.int64((x * _H01) >> np.uint64(56))


@hot
def popcount_table_k(x):
    c = 0
    for i in range(8):
        c += POP8[(x >> np.uint64(8 * i)) & np.uint64(0xFF)]
    return c


@hot
def low_mask_k(j):
    # bits 1..j set
    if j >= 64:
        return ~np.uint64(0)
    return (_U1 << np.uint64(j)) - _U1


@hot
def rank1_k(x, j):
    return popcount_k(x & low_mask_k(j))


@hot
def select1_k(x, i):
    # position of the i-th set bit, 0 if there is none
    for byte in range(8):
        b = (x >> np.uint64(8 * byte)) & np.uint64(0xFF)
        c = POP8[b]
        if i <= c:
            return 8 * byte + np.int64(SELECT8[b, i - 1])
        i -= c
    return 0


@hot
def lowest_bit_k(x):
    # position of the least significant set bit (x != 0)
    return np.int64(trailing_zeros(x)) + 1


@hot
def highest_bit_k(x):
    # position of the most significant set bit (x != 0)
    return 64 - np.int64(leading_zeros(x))


@hot
def bit_length_k(x):
    if x == 0:
        return 0
    return highest_bit_k(np.uint64(x))


@hot
def rotl_k(x, k):
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


@hot
def splitmix_k(z):
    z = (z ^ (z >> np.uint64(30))) * _SM1
    z = (z ^ (z >> np.uint64(27))) * _SM2
    return z ^ (z >> np.uint64(31))


# Random source layout: [s0, s1, s2, s3, bits_consumed, uniform_calls, uniform_rejections]
RS_BITS, RS_CALLS, RS_REJECTS = 4, 5, 6


@hot
def next_word_k(rs):
    s0, s1, s2, s3 = rs[0], rs[1], rs[2], rs[3]
    out = rotl_k(s1 * np.uint64(5), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = rotl_k(s3, 45)
    rs[0], rs[1], rs[2], rs[3] = s0, s1, s2, s3
    return out


@hot
def uniform_k(rs, x):
    """Exact uniform draw from [1..x] for 1 <= x < 2**63 by rejection on the
    next power of two."""
    rs[RS_CALLS] += _U1
    if x <= 1:
        return 1
    k = bit_length_k(x - 1)
    shift = np.uint64(64 - k)
    while True:
        r = np.int64(next_word_k(rs) >> shift)
        rs[RS_BITS] += np.uint64(k)
        if r < x:
            return r + 1
        rs[RS_REJECTS] += _U1


@hot
def seed_state_k(rs, seed):
    z = np.uint64(seed)
    for i in range(4):
        z += _GOLDEN
        rs[i] = splitmix_k(z)
    rs[4] = 0
    rs[5] = 0
    rs[6] = 0


def mix(master: int, i: int) -> int:
    """Derive the i-th child seed of ``master`` (splitmix64 finaliser)."""
    z = (master + (i + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


# Python surface --------------------------------------------------------

NATIVE_POPCOUNT = hasattr(int, "bit_count")


def _popcount_table(s):
    c = 0
    while s:
        c += int(POP8[s & 0xFF])
        s >>= 8
    return c


def popcount(s: int, width: int = W) -> int:
    s &= (1 << width) - 1
    if NATIVE_POPCOUNT:
        return s.bit_count()
    return _popcount_table(s)


def _check_pos(j, width):
    if not 1 <= j <= width:
        raise ContractError(f"bit position {j} outside 1..{width}")


def rank1(s: int, j: int, width: int = W) -> int:
    """Number of set bits among positions 1..j."""
    _check_pos(j, width)
    return popcount(s & ((1 << j) - 1), width)


def select1(s: int, i: int, width: int = W) -> int:
    """Position of the i-th set bit."""
    s &= (1 << width) - 1
    if i < 1 or i > popcount(s, width):
        raise NoSuchBitError(f"word has no set bit number {i}")
    pos = 0
    while True:
        byte = s & 0xFF
        c = int(POP8[byte])
        if i <= c:
            return pos + int(SELECT8[byte, i - 1])
        i -= c
        s >>= 8
        pos += 8


class RandomSource:
    """Seeded bit stream with exact replay and consumption counters."""

    def __init__(self, seed: int = 0):
        self.seed = seed & MASK64
        self.state = np.zeros(7, dtype=np.uint64)
        seed_state_k(self.state, np.uint64(self.seed))

    @property
    def bits_consumed(self) -> int:
        return int(self.state[RS_BITS])

    @property
    def uniform_calls(self) -> int:
        return int(self.state[RS_CALLS])

    @property
    def uniform_rejections(self) -> int:
        return int(self.state[RS_REJECTS])

    def next_word(self) -> int:
        self.state[RS_BITS] += np.uint64(64)
        return int(next_word_k(self.state))

    def clone(self) -> "RandomSource":
        other = RandomSource.__new__(RandomSource)
        other.seed = self.seed
        other.state = self.state.copy()
        return other


def uniform(src: RandomSource, x: int) -> int:
    """Uniform integer in [1..x] for 1 <= x <= 2**64, no modulo bias."""
    if x < 1 or x > 1 << W:
        raise ContractError(f"uniform needs 1 <= x <= 2^{W}, got {x}")
    if x < 1 << 63:
        return int(uniform_k(src.state, x))
    # top of the range: same rejection rule on full 64-bit words
    src.state[RS_CALLS] += _U1
    k = (x - 1).bit_length()
    while True:
        r = int(next_word_k(src.state)) >> (W - k)
        src.state[RS_BITS] += np.uint64(k)
        if r < x:
            return r + 1
        src.state[RS_REJECTS] += _U1
