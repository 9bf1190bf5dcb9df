"""Keyed small-domain permutation dealer (swap-or-not, optional sometimes-recurse).

The turn-t card is P_k(t). The PRF is pluggable; the default is a keyed
integer mixer meant for tests and simulations only, with no cryptographic
claim attached.
"""
import math
from collections import namedtuple

import numpy as np

from ..arena import hot, kernel
from ..memory import MemoryAccount
from ..subset_sampler import InfeasibleError
from ..wordops import splitmix_k
from .base import AuditError, Dealer, NotOpenBookError

PRPLayout = namedtuple("PRPLayout", "key meta n rounds recurse")
# meta segment: [turn, ops]

_C1 = np.uint64(0xD6E8FEB86659FD93)
_C2 = np.uint64(0xA0761D6478BD642F)


@hot
def mixer_prf_k(key, a, b):
    z = splitmix_k(key ^ (np.uint64(a) * _C1))
    return splitmix_k(z ^ (np.uint64(b) * _C2) ^ key)


def swap_or_not(prf, key, size, x, rounds, level):
    """One swap-or-not permutation of [0, size); each round is an involution."""
    for r in range(rounds):
        tag = (level << 32) | r
        k = np.int64(prf(key, 2 * tag, size) % np.uint64(size))
        partner = (k + size - x) % size
        hi = max(x, partner)
        if prf(key, 2 * tag + 1, hi) & np.uint64(1):
            x = partner
    return x


def prp_eval(prf, key, size, x, rounds, recurse):
    """P(x) on [0, size) for any PRF callable ``prf(key, a, b) -> uint64``."""
    level = 0
    while True:
        x = swap_or_not(prf, key, size, x, rounds, level)
        half = size // 2
        # sometimes-recurse: outputs in the lower half are permuted again
        if not recurse or half < 1 or x >= half:
            return x
        size = half
        level += 1


# compiled copies bound to the default mixer (function values passed through
# compiled calls would make the kernels uncacheable)
@kernel
def swap_or_not_k(key, size, x, rounds, level):
    for r in range(rounds):
        tag = (level << 32) | r
        k = np.int64(mixer_prf_k(key, 2 * tag, size) % np.uint64(size))
        partner = (k + size - x) % size
        hi = max(x, partner)
        if mixer_prf_k(key, 2 * tag + 1, hi) & np.uint64(1):
            x = partner
    return x


@kernel
def prp_eval_k(key, size, x, rounds, recurse):
    level = 0
    while True:
        x = swap_or_not_k(key, size, x, rounds, level)
        half = size // 2
        if not recurse or half < 1 or x >= half:
            return x
        size = half
        level += 1


@kernel
def prp_reset_k(buf, L):
    buf[L.meta] = 0
    buf[L.meta + 1] = 0


@kernel
def prp_choose_k(buf, L, rs):
    buf[L.meta + 1] += 1
    return prp_eval_k(np.uint64(buf[L.key]), L.n, buf[L.meta], L.rounds, L.recurse) + 1


@kernel
def prp_card_k(buf, L, choice):
    return choice


@kernel
def prp_commit_k(buf, L, choice):
    buf[L.meta] += 1


@kernel
def prp_ops_k(buf, L):
    return buf[L.meta + 1]


def default_rounds(n: int) -> int:
    return 8 * max(1, math.ceil(math.log2(n))) if n > 1 else 0


class PRPDealer(Dealer):
    """Draws P_k(1), P_k(2), ... for a secret key k; the key is the whole state."""

    kind = "prp"
    layout_type = PRPLayout
    open_book = False
    reset_k, choose_k, card_k, commit_k = prp_reset_k, prp_choose_k, prp_card_k, prp_commit_k
    ops_k = prp_ops_k

    def __init__(self, n: int, key: int, rounds: int | None = None, recurse: bool = False,
                 prf=None):
        super().__init__(n)
        self.rounds = default_rounds(n) if rounds is None else rounds
        self.recurse = recurse
        # a custom PRF is honoured by the Python-level calls; the compiled
        # batch path always uses the default mixer
        self.prf = prf
        self.layout = PRPLayout(key=self.arena.alloc("key", 1), meta=self.arena.alloc("meta", 2),
                                n=n, rounds=self.rounds, recurse=int(recurse))
        self.buf = self.arena.new_buffer()
        self.buf[self.layout.key] = np.uint64(key & (2**64 - 1)).view(np.int64)

    @property
    def key(self) -> int:
        return int(np.int64(self.buf[self.layout.key]).view(np.uint64))

    def permute(self, t: int) -> int:
        """P_k(t) for t in [1..n]."""
        if not 1 <= t <= self.n:
            raise ValueError(f"position {t} outside 1..{self.n}")
        key = np.uint64(self.key)
        if self.prf is None:
            return int(prp_eval_k(key, self.n, t - 1, self.rounds, int(self.recurse))) + 1
        return int(prp_eval(self.prf, key, self.n, t - 1, self.rounds, int(self.recurse))) + 1

    def choose(self, src=None) -> int:
        # deterministic given the key; ``src`` is accepted for protocol symmetry
        if self.turn >= self.n:
            raise AuditError("deck is exhausted")
        self.buf[self.layout.meta + 1] += 1
        return self.permute(self.turn + 1)

    def draw(self, src=None) -> int:
        return super().draw(src)

    def memory(self) -> MemoryAccount:
        return MemoryAccount({"key": 64})

    def codec_fields(self):
        return [("key", 64)]

    def next_distribution(self, cap=1 << 20):
        # the only randomness is the 64-bit key
        raise InfeasibleError("key space of 2^64 exceeds the enumeration budget")

    def choice_support(self):
        raise NotOpenBookError("the PRP dealer's key is secret")


def prp_draw(dealer: PRPDealer) -> int:
    return dealer.draw()
