"""Shared dealer plumbing: the per-turn protocol, state copies and snapshots."""
from fractions import Fraction

import numpy as np

from .. import bitpack
from ..arena import Arena
from ..memory import MemoryAccount
from ..wordops import RandomSource
from .protocol import register


class AuditError(RuntimeError):
    """A dealer broke a game invariant (for example a repeated card)."""


class NotOpenBookError(RuntimeError):
    pass


class Dealer:
    """A dealer produces one card per turn; the turn counter is public input.

    State lives in ``self.buf`` (an int64 arena) described by ``self.layout``,
    whose ``meta`` segment starts [turn, ops]. Subclasses provide compiled
    ``reset/choose/card/commit/ops`` kernels over ``(buf, layout)``. A turn is
    ``choose`` (consumes randomness only), ``card`` (decodes the choice) and
    ``commit`` (applies it).
    """

    kind = "base"
    open_book = True
    layout_type = None

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if cls.layout_type is not None:
            register(cls.layout_type, cls)

    def __init__(self, n: int):
        if n < 1:
            raise ValueError("deck size must be >= 1")
        self.n = n
        self.arena = Arena()

    # compiled protocol, set by subclasses
    reset_k = choose_k = card_k = commit_k = ops_k = None
    preview_k = None  # optional fused choose+card

    @property
    def turn(self) -> int:
        """Number of cards drawn so far."""
        return int(self.buf[self.layout.meta])

    @property
    def ops(self) -> int:
        return int(type(self).ops_k(self.buf, self.layout))

    def reset(self) -> "Dealer":
        type(self).reset_k(self.buf, self.layout)
        return self

    def choose(self, src: RandomSource) -> int:
        if self.turn >= self.n:
            raise AuditError("deck is exhausted")
        return int(type(self).choose_k(self.buf, self.layout, src.state))

    def card(self, choice: int) -> int:
        return int(type(self).card_k(self.buf, self.layout, choice))

    def commit(self, choice: int):
        type(self).commit_k(self.buf, self.layout, choice)

    def draw(self, src: RandomSource) -> int:
        choice = self.choose(src)
        c = self.card(choice)
        self.commit(choice)
        return c

    def clone(self) -> "Dealer":
        other = self.__class__.__new__(self.__class__)
        other.__dict__.update(self.__dict__)
        other.buf = self.buf.copy()
        return other

    def memory(self) -> MemoryAccount:
        raise NotImplementedError

    @property
    def memory_bits(self) -> int:
        return self.memory().total

    # exact next-draw law, used by the exact myopic guesser
    def next_distribution(self, cap: int = 1 << 20) -> tuple:
        raise NotImplementedError

    def choice_support(self) -> list:
        """Choices the next turn can make with positive probability."""
        raise NotImplementedError

    # fixed-width snapshots, used by the codec
    def codec_fields(self) -> list:
        """(segment name, bits per entry) pairs; derived segments are left out."""
        raise NotImplementedError

    def rebuild(self):
        """Recompute derived state after a restore."""

    @property
    def state_bits(self) -> int:
        return sum(self.arena.view(self.buf, name).size * w for name, w in self.codec_fields())

    def snapshot(self) -> int:
        # negative entries show up as huge words and fail the width check
        fields = [(self.arena.view(self.buf, name).view(np.uint64), w) for name, w in self.codec_fields()]
        return bitpack.pack(fields)[0]

    def restore(self, value: int, turn: int) -> "Dealer":
        """A copy of this dealer whose state is decoded from a snapshot."""
        fields = self.codec_fields()
        shapes = [(self.arena.view(self.buf, name).shape, w) for name, w in fields]
        other = self.clone()
        for (name, _), vals in zip(fields, bitpack.unpack(value, shapes)):
            self.arena.view(other.buf, name)[...] = vals.view(np.int64)
        other.buf[other.layout.meta] = turn
        other.rebuild()
        return other

    def available(self) -> set:
        """Cards not yet drawn, decoded from the state alone."""
        raise NotImplementedError


def uniform_law(cards) -> dict:
    cards = list(cards)
    return {c: Fraction(1, len(cards)) for c in cards}
