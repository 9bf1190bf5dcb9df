"""Multiset of coloured marbles with O(1) add, remove-by-colour and sampling.

Marbles live in slots 1..size of a node array with no gaps. Marbles of one
colour form a doubly linked list whose head is ``anchor[colour]``. Removing
a marble moves the last node into the freed slot. Slot 0 is Nil.
"""
from collections import Counter, namedtuple

import numpy as np
from numba import njit

from .arena import Arena, hot, kernel
from .memory import MemoryAccount, bits_for
from .wordops import RandomSource, uniform_k

UrnLayout = namedtuple("UrnLayout", "color prev nxt anchor size m k")
# ``size`` is the offset of the one-word marble count
NIL = 0


class UrnError(ValueError):
    pass


class UrnCapacityError(UrnError):
    pass


class EmptyColorError(UrnError):
    pass


class EmptyUrnError(UrnError):
    pass


@kernel
def urn_add_k(buf, U, c):
    s = buf[U.size] + 1
    buf[U.size] = s
    head = buf[U.anchor + c]
    buf[U.color + s] = c
    buf[U.prev + s] = NIL
    buf[U.nxt + s] = head
    if head != NIL:
        buf[U.prev + head] = s
    buf[U.anchor + c] = s


@kernel
def urn_remove_at_k(buf, U, i):
    """Remove the marble in slot i and refill the slot from the end."""
    c = buf[U.color + i]
    p = buf[U.prev + i]
    n = buf[U.nxt + i]
    if p != NIL:
        buf[U.nxt + p] = n
    else:
        buf[U.anchor + c] = n
    if n != NIL:
        buf[U.prev + n] = p
    last = buf[U.size]
    if i != last:
        c2 = buf[U.color + last]
        p2 = buf[U.prev + last]
        n2 = buf[U.nxt + last]
        buf[U.color + i] = c2
        buf[U.prev + i] = p2
        buf[U.nxt + i] = n2
        if p2 != NIL:
            buf[U.nxt + p2] = i
        else:
            buf[U.anchor + c2] = i
        if n2 != NIL:
            buf[U.prev + n2] = i
    buf[U.color + last] = 0
    buf[U.prev + last] = NIL
    buf[U.nxt + last] = NIL
    buf[U.size] = last - 1
    return c


@kernel
def urn_remove_k(buf, U, c):
    urn_remove_at_k(buf, U, buf[U.anchor + c])


@hot
def urn_sample_k(buf, U, rs):
    return buf[U.color + uniform_k(rs, buf[U.size])]


@kernel
def urn_clear_k(buf, U):
    buf[U.color:U.color + U.m + 1] = 0
    buf[U.prev:U.prev + U.m + 1] = 0
    buf[U.nxt:U.nxt + U.m + 1] = 0
    buf[U.anchor:U.anchor + U.k + 1] = 0
    buf[U.size] = 0


def urn_layout(arena: Arena, prefix: str, m: int, k: int) -> UrnLayout:
    return UrnLayout(
        color=arena.alloc(f"{prefix}.color", m + 1),
        prev=arena.alloc(f"{prefix}.prev", m + 1),
        nxt=arena.alloc(f"{prefix}.nxt", m + 1),
        anchor=arena.alloc(f"{prefix}.anchor", k + 1),
        size=arena.alloc(f"{prefix}.size", 1),
        m=m,
        k=k,
    )


def urn_memory(U: UrnLayout) -> MemoryAccount:
    ptr = bits_for(U.m + 1)
    acct = MemoryAccount()
    acct.add("nodes", U.m * (bits_for(U.k) + 2 * ptr))
    acct.add("anchors", U.k * ptr)
    acct.add("size", ptr)
    return acct


def urn_codec_fields(prefix: str, U: UrnLayout) -> list:
    ptr = bits_for(U.m + 1)
    return [(f"{prefix}.color", bits_for(U.k + 1)), (f"{prefix}.prev", ptr), (f"{prefix}.nxt", ptr),
            (f"{prefix}.anchor", ptr), (f"{prefix}.size", ptr)]


def urn_audit(buf, U: UrnLayout, expected: dict | None = None):
    """Raise AssertionError unless every structural invariant holds."""
    color = buf[U.color:U.color + U.m + 1]
    prev = buf[U.prev:U.prev + U.m + 1]
    nxt = buf[U.nxt:U.nxt + U.m + 1]
    anchor = buf[U.anchor:U.anchor + U.k + 1]
    size, m, k = int(buf[U.size]), U.m, U.k
    assert 0 <= size <= m
    for s in range(1, size + 1):
        assert 1 <= color[s] <= k, f"slot {s} has colour {color[s]}"
    for s in range(size + 1, m + 1):
        assert color[s] == 0 and prev[s] == NIL and nxt[s] == NIL
    seen = 0
    counts = {}
    for c in range(1, k + 1):
        node, back = int(anchor[c]), NIL
        while node != NIL:
            assert 1 <= node <= size, f"colour {c} list leaves the live region"
            assert color[node] == c
            assert prev[node] == back, f"broken back link at slot {node}"
            counts[c] = counts.get(c, 0) + 1
            seen += 1
            assert seen <= size, "cycle in colour lists"
            back, node = node, int(nxt[node])
    assert seen == size, "some live marble is unreachable from the anchors"
    if expected is not None:
        want = {c: v for c, v in expected.items() if v}
        assert counts == want, f"counts {counts} != expected {want}"


@njit(cache=True)
def urn_sample_counts_k(buf, U, rs, count, out):
    for _ in range(count):
        out[urn_sample_k(buf, U, rs)] += 1


class Urn:
    def __init__(self, m: int, k: int):
        if m < 1 or k < 1:
            raise ValueError("need m >= 1 and k >= 1")
        self.m, self.k = m, k
        self.arena = Arena()
        self.layout = urn_layout(self.arena, "urn", m, k)
        self.buf = self.arena.new_buffer()

    @property
    def size(self) -> int:
        return int(self.buf[self.layout.size])

    @property
    def anchors(self) -> tuple:
        a = self.layout.anchor
        return tuple(int(x) for x in self.buf[a + 1:a + self.k + 1])

    def _check_color(self, color):
        if not 1 <= color <= self.k:
            raise ValueError(f"colour {color} outside 1..{self.k}")

    def add(self, color: int) -> "Urn":
        self._check_color(color)
        if self.size >= self.m:
            raise UrnCapacityError(f"urn already holds {self.m} marbles")
        urn_add_k(self.buf, self.layout, color)
        return self

    def remove(self, color: int) -> "Urn":
        self._check_color(color)
        if self.buf[self.layout.anchor + color] == NIL:
            raise EmptyColorError(f"no marble of colour {color}")
        urn_remove_k(self.buf, self.layout, color)
        return self

    def sample(self, src: RandomSource) -> int:
        if self.size == 0:
            raise EmptyUrnError("cannot sample an empty urn")
        return int(urn_sample_k(self.buf, self.layout, src.state))

    def sample_without_replacement(self, src: RandomSource) -> int:
        if self.size == 0:
            raise EmptyUrnError("cannot sample an empty urn")
        slot = int(uniform_k(src.state, self.size))
        return int(urn_remove_at_k(self.buf, self.layout, slot))

    def sample_counts(self, count: int, src: RandomSource) -> np.ndarray:
        """Histogram (index = colour) of ``count`` samples with replacement."""
        if self.size == 0:
            raise EmptyUrnError("cannot sample an empty urn")
        out = np.zeros(self.k + 1, dtype=np.int64)
        urn_sample_counts_k(self.buf, self.layout, src.state, count, out)
        return out

    def counts(self) -> Counter:
        c = self.layout.color
        return Counter(int(x) for x in self.buf[c + 1:c + self.size + 1])

    def audit(self, expected: dict | None = None):
        urn_audit(self.buf, self.layout, expected)

    def memory(self) -> MemoryAccount:
        return urn_memory(self.layout)


def urn_add(u: Urn, color: int) -> Urn:
    return u.add(color)


def urn_remove(u: Urn, color: int) -> Urn:
    return u.remove(color)


def urn_sample(u: Urn, src: RandomSource) -> int:
    return u.sample(src)


def sample_without_replacement(u: Urn, src: RandomSource) -> int:
    return u.sample_without_replacement(src)
