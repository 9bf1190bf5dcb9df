"""Bitmap, Fisher-Yates and perfect (subset-sampler) dealers."""
from collections import namedtuple
from fractions import Fraction

import numpy as np

from .. import bitpack
from ..arena import hot, kernel
from ..memory import MemoryAccount, bits_for
from ..subset_sampler import (OPS, InfeasibleError, ss_codec_fields, ss_contains_k, ss_distribution, ss_fill_k,
                              ss_init, ss_layout, ss_memory, ss_ops_k, ss_rebuild_k, ss_remove_k, ss_sample_k)
from ..wordops import uniform_k
from .base import Dealer, uniform_law

BitmapLayout = namedtuple("BitmapLayout", "bits meta n")
FYLayout = namedtuple("FYLayout", "A meta n")
PerfectLayout = namedtuple("PerfectLayout", "ss meta n")
# every dealer's meta segment starts [turn, ops]

_U1 = np.uint64(1)


@kernel
def meta_ops_k(buf, L):
    return buf[L.meta + 1]


# bitmap -----------------------------------------------------------------

@kernel
def bitmap_reset_k(buf, L):
    buf[L.bits:L.bits + (L.n + 63) // 64] = 0
    for c in range(1, L.n + 1):
        q = L.bits + ((c - 1) >> 6)
        buf[q] = np.int64(np.uint64(buf[q]) | (_U1 << np.uint64((c - 1) & 63)))
    buf[L.meta] = 0
    buf[L.meta + 1] = 0


@hot
def bitmap_available_k(buf, L, c):
    return (np.uint64(buf[L.bits + ((c - 1) >> 6)]) >> np.uint64((c - 1) & 63)) & _U1 == _U1


@kernel
def bitmap_choose_k(buf, L, rs):
    while True:
        c = uniform_k(rs, L.n)
        buf[L.meta + 1] += 2
        if bitmap_available_k(buf, L, c):
            return c


@kernel
def bitmap_card_k(buf, L, choice):
    return choice


@kernel
def bitmap_commit_k(buf, L, choice):
    if not bitmap_available_k(buf, L, choice):
        raise ValueError("card already drawn")
    q = L.bits + ((choice - 1) >> 6)
    buf[q] = np.int64(np.uint64(buf[q]) & ~(_U1 << np.uint64((choice - 1) & 63)))
    buf[L.meta] += 1
    buf[L.meta + 1] += 1


class BitmapDealer(Dealer):
    """Keeps one availability bit per card and rejection-samples a free one."""

    kind = "bitmap"
    layout_type = BitmapLayout
    reset_k, choose_k, card_k, commit_k = bitmap_reset_k, bitmap_choose_k, bitmap_card_k, bitmap_commit_k
    ops_k = meta_ops_k

    def __init__(self, n: int):
        super().__init__(n)
        self.words = (n + 63) // 64
        self.layout = BitmapLayout(bits=self.arena.alloc("bits", self.words),
                                   meta=self.arena.alloc("meta", 2), n=n)
        self.buf = self.arena.new_buffer()
        self.reset()

    def available(self) -> set:
        return {c for c in range(1, self.n + 1) if bitmap_available_k(self.buf, self.layout, c)}

    def memory(self) -> MemoryAccount:
        return MemoryAccount({"bitmap": self.n})

    def next_distribution(self, cap=1 << 20):
        # one rejection round has n equally likely outcomes; the loop keeps
        # the accepted ones, so the law is uniform over them
        if self.n > cap:
            raise InfeasibleError(f"more than {cap} branches")
        return uniform_law(sorted(self.available())), self.n

    def choice_support(self):
        return sorted(self.available())

    # the snapshot is exactly n bits, one per card
    def codec_fields(self):
        return [("bits", 64)]

    @property
    def state_bits(self) -> int:
        return self.n

    def snapshot(self) -> int:
        return super().snapshot() & ((1 << self.n) - 1)

    def restore(self, value: int, turn: int) -> "BitmapDealer":
        if value >> self.n:
            raise ValueError("snapshot wider than the deck")
        return super().restore(value, turn)


# Fisher-Yates -----------------------------------------------------------

@kernel
def fy_reset_k(buf, L):
    for i in range(L.n + 1):
        buf[L.A + i] = i
    buf[L.meta] = 0
    buf[L.meta + 1] = 0


@kernel
def fy_choose_k(buf, L, rs):
    buf[L.meta + 1] += 1
    return uniform_k(rs, L.n - buf[L.meta])


@kernel
def fy_card_k(buf, L, choice):
    return buf[L.A + choice]


@kernel
def fy_commit_k(buf, L, choice):
    live = L.n - buf[L.meta]
    buf[L.A + choice] = buf[L.A + live]
    buf[L.meta] += 1
    buf[L.meta + 1] += 2


class FisherYatesDealer(Dealer):
    """Array of the undrawn cards; a drawn slot is refilled from the end."""

    kind = "fy"
    layout_type = FYLayout
    reset_k, choose_k, card_k, commit_k = fy_reset_k, fy_choose_k, fy_card_k, fy_commit_k
    ops_k = meta_ops_k

    def __init__(self, n: int):
        super().__init__(n)
        self.layout = FYLayout(A=self.arena.alloc("A", n + 1), meta=self.arena.alloc("meta", 2), n=n)
        self.buf = self.arena.new_buffer()
        self.reset()

    @property
    def array(self) -> tuple:
        a = self.layout.A
        return tuple(int(x) for x in self.buf[a + 1:a + self.n - self.turn + 1])

    def available(self) -> set:
        return set(self.array)

    def memory(self) -> MemoryAccount:
        return MemoryAccount({"array": self.n * bits_for(self.n)})

    def next_distribution(self, cap=1 << 20):
        live = self.n - self.turn
        if live > cap:
            raise InfeasibleError(f"more than {cap} branches")
        law = {}
        for c in self.array:
            law[c] = law.get(c, 0) + Fraction(1, live)
        return law, live

    def choice_support(self):
        return list(range(1, self.n - self.turn + 1))

    def codec_fields(self):
        return [("A", bits_for(self.n + 1))]


# perfect ----------------------------------------------------------------

@kernel
def perfect_reset_k(buf, L):
    ss_fill_k(buf, L.ss)
    buf[L.ss.meta + OPS] = 0
    buf[L.meta] = 0


@kernel
def perfect_choose_k(buf, L, rs):
    return ss_sample_k(buf, L.ss, rs)


@kernel
def perfect_card_k(buf, L, choice):
    return choice


@kernel
def perfect_commit_k(buf, L, choice):
    ss_remove_k(buf, L.ss, choice)
    buf[L.meta] += 1


@kernel
def perfect_ops_k(buf, L):
    return ss_ops_k(buf, L.ss)


class PerfectDealer(Dealer):
    """Uniform draw from the set of undrawn cards held in a subset sampler."""

    kind = "perfect"
    layout_type = PerfectLayout
    reset_k, choose_k, card_k, commit_k = perfect_reset_k, perfect_choose_k, perfect_card_k, perfect_commit_k
    ops_k = perfect_ops_k

    def __init__(self, n: int):
        super().__init__(n)
        ss = ss_layout(self.arena, "ss", n)
        self.layout = PerfectLayout(ss=ss, meta=self.arena.alloc("meta", 2), n=n)
        self.buf = self.arena.new_buffer()
        ss_init(self.buf, ss)
        self.reset()

    def available(self) -> set:
        return {c for c in range(1, self.n + 1) if ss_contains_k(self.buf, self.layout.ss, c)}

    def memory(self) -> MemoryAccount:
        return ss_memory(self.layout.ss)

    def next_distribution(self, cap=1 << 20):
        return ss_distribution(self.buf, self.layout.ss, cap)

    def choice_support(self):
        return sorted(self.available())

    def codec_fields(self):
        return ss_codec_fields("ss", self.layout.ss)

    def rebuild(self):
        ss_rebuild_k(self.buf, self.layout.ss)
