"""Array of d small non-negative counters in O(d + sum) bits.

Each counter owns a 2-bit slot holding 0, 1 or 2; the slot value 3 is an
escape meaning "look in the overflow table". The overflow table is an open
addressed hash keyed by counter index. Measured storage charges each live
overflow entry its index width plus the Elias gamma length of ``value - 2``.
"""
from collections import namedtuple

import numpy as np
from numba import njit

from .arena import Arena, hot, kernel
from .memory import MemoryAccount, bits_for
from .wordops import bit_length_k

CALayout = namedtuple("CALayout", "slots keys vals meta d tbits")
# meta segment: [live_entries, gamma_bits]

_GOLD = np.uint64(0x9E3779B97F4A7C15)
_THREE = np.uint64(3)
ESCAPE = 3


class CounterUnderflowError(ValueError):
    pass


@hot
def _slot_get(buf, L, i):
    sh = np.uint64(((i - 1) & 31) * 2)
    return np.int64((np.uint64(buf[L.slots + ((i - 1) >> 5)]) >> sh) & _THREE)


@kernel
def _slot_set(buf, L, i, v):
    q = L.slots + ((i - 1) >> 5)
    sh = np.uint64(((i - 1) & 31) * 2)
    buf[q] = np.int64((np.uint64(buf[q]) & ~(_THREE << sh)) | (np.uint64(v) << sh))


@hot
def _home(key, tbits):
    return np.int64((np.uint64(key) * _GOLD) >> np.uint64(64 - tbits))


@hot
def _find(buf, L, key):
    mask = (1 << L.tbits) - 1
    h = _home(key, L.tbits)
    while buf[L.keys + h] != 0 and buf[L.keys + h] != key:
        h = (h + 1) & mask
    return h


@kernel
def _delete(buf, L, h):
    # backward-shift deletion keeps probe chains unbroken
    mask = (1 << L.tbits) - 1
    keys, vals = L.keys, L.vals
    j = h
    while True:
        buf[keys + j] = 0
        buf[vals + j] = 0
        k = (j + 1) & mask
        while True:
            if buf[keys + k] == 0:
                return
            home = _home(buf[keys + k], L.tbits)
            if j < k:
                skip = j < home <= k
            else:
                skip = home > j or home <= k
            if not skip:
                break
            k = (k + 1) & mask
        buf[keys + j] = buf[keys + k]
        buf[vals + j] = buf[vals + k]
        j = k


@kernel
def _gamma(v):
    return 2 * bit_length_k(v) - 1


@hot
def ca_get_k(buf, L, i):
    v = _slot_get(buf, L, i)
    if v < ESCAPE:
        return v
    return buf[L.vals + _find(buf, L, i)]


@kernel
def ca_set_k(buf, L, i, new):
    m = L.meta
    if _slot_get(buf, L, i) == ESCAPE:
        h = _find(buf, L, i)
        buf[m + 1] -= _gamma(buf[L.vals + h] - 2)
        if new < ESCAPE:
            _delete(buf, L, h)
            buf[m] -= 1
            _slot_set(buf, L, i, new)
        else:
            buf[L.vals + h] = new
            buf[m + 1] += _gamma(new - 2)
    elif new < ESCAPE:
        _slot_set(buf, L, i, new)
    else:
        h = _find(buf, L, i)
        buf[L.keys + h] = i
        buf[L.vals + h] = new
        buf[m] += 1
        buf[m + 1] += _gamma(new - 2)
        _slot_set(buf, L, i, ESCAPE)


@kernel
def ca_add_k(buf, L, i, delta):
    new = ca_get_k(buf, L, i) + delta
    if new < 0:
        raise ValueError("counter underflow")
    ca_set_k(buf, L, i, new)
    return new


@kernel
def ca_fill_k(buf, L, initial):
    buf[L.slots:L.slots + (L.d + 31) // 32] = 0
    size = 1 << L.tbits
    buf[L.keys:L.keys + size] = 0
    buf[L.vals:L.vals + size] = 0
    buf[L.meta] = 0
    buf[L.meta + 1] = 0
    for i in range(1, L.d + 1):
        ca_set_k(buf, L, i, initial)


@kernel
def ca_rebuild_k(buf, L):
    entries = 0
    gamma_bits = 0
    for h in range(1 << L.tbits):
        if buf[L.keys + h] != 0:
            entries += 1
            gamma_bits += _gamma(buf[L.vals + h] - 2)
    buf[L.meta] = entries
    buf[L.meta + 1] = gamma_bits


def ca_layout(arena: Arena, prefix: str, d: int) -> CALayout:
    tbits = max(1, (2 * d - 1).bit_length())
    return CALayout(
        slots=arena.alloc(f"{prefix}.slots", (d + 31) // 32),
        keys=arena.alloc(f"{prefix}.keys", 1 << tbits),
        vals=arena.alloc(f"{prefix}.vals", 1 << tbits),
        meta=arena.alloc(f"{prefix}.meta", 2),
        d=d,
        tbits=tbits,
    )


def ca_memory(buf, L: CALayout) -> MemoryAccount:
    entries, gamma_bits = int(buf[L.meta]), int(buf[L.meta + 1])
    acct = MemoryAccount()
    acct.add("slots", 2 * L.d)
    acct.add("overflow_index", entries * bits_for(L.d))
    acct.add("overflow_value", gamma_bits)
    return acct


def ca_codec_fields(prefix: str, L: CALayout, value_bound: int) -> list:
    """Non-derived segments with fixed widths (the meta counts are rebuilt)."""
    return [(f"{prefix}.slots", 64), (f"{prefix}.keys", bits_for(L.d + 1)),
            (f"{prefix}.vals", bits_for(value_bound + 1))]


class CounterArray:
    """d counters x_1..x_d with O(1) reads and updates."""

    def __init__(self, d: int, initial: int = 0):
        if d < 1 or initial < 0:
            raise ValueError("need d >= 1 and initial >= 0")
        self.d = d
        self.arena = Arena()
        self.layout = ca_layout(self.arena, "ca", d)
        self.buf = self.arena.new_buffer()
        ca_fill_k(self.buf, self.layout, initial)

    def _check(self, i):
        if not 1 <= i <= self.d:
            raise IndexError(f"counter {i} outside 1..{self.d}")

    def get(self, i: int) -> int:
        self._check(i)
        return int(ca_get_k(self.buf, self.layout, i))

    def add(self, i: int, delta: int) -> "CounterArray":
        self._check(i)
        if self.get(i) + delta < 0:
            raise CounterUnderflowError(f"counter {i} would drop below zero")
        ca_add_k(self.buf, self.layout, i, delta)
        return self

    @property
    def values(self) -> tuple:
        return tuple(int(ca_get_k(self.buf, self.layout, i)) for i in range(1, self.d + 1))

    @property
    def bit_budget(self) -> int:
        return self.memory().total

    def memory(self) -> MemoryAccount:
        return ca_memory(self.buf, self.layout)


def ca_new(d: int, initial: int) -> CounterArray:
    return CounterArray(d, initial)


def ca_get(a: CounterArray, i: int) -> int:
    return a.get(i)


def ca_add(a: CounterArray, i: int, delta: int) -> CounterArray:
    return a.add(i, delta)
