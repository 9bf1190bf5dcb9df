"""Dynamic subset of [1..n] with O(1) membership, add, remove and uniform sampling.

The domain is cut into cells of ``cw = ceil(log2 n)`` consecutive elements;
each cell is one bitmap word. Cells sit in an array sorted by population
(number of members), so every population p owns a contiguous interval.
The mass a_p = p * interval_size[p] is split into quotient marbles in an
urn and a residue in a small residue tree; sampling picks a population by
that mass, then a cell in its interval, then a member bit.
"""
from collections import namedtuple
from fractions import Fraction

import numpy as np
from numba import njit

from .arena import Arena, hot, kernel
from .memory import MemoryAccount, bits_for
from .smalldist import (DEFAULT_TABLE_BUDGET, log_size, rt_init, rt_layout, rt_memory, rt_rebuild_k,
                        rtree_clear_k, rtree_distribution, rtree_residue_k, rtree_sample_k, rtree_total_k,
                        rtree_update_k)
from .urn import urn_add_k, urn_clear_k, urn_codec_fields, urn_layout, urn_memory, urn_remove_k, urn_sample_k
from .wordops import RandomSource, popcount_k, select1_k, uniform_k

SSLayout = namedtuple("SSLayout", "cells block loc ib isz meta urn rt n npad cw ncells")
# meta segment: [size, ops]
SIZE, OPS = 0, 1
# ops are charged per call at the worst-case step count: add/remove is the cell
# move plus two mass changes of at most one urn and one tree update each
UPDATE_COST = 10

_U1 = np.uint64(1)


class SamplerError(ValueError):
    pass


class DoubleAddError(SamplerError):
    pass


class AbsentRemoveError(SamplerError):
    pass


class EmptySetError(SamplerError):
    pass


class InfeasibleError(RuntimeError):
    """Exact enumeration would exceed its branch budget."""


@kernel
def _swap(buf, S, a, b):
    if a == b:
        return
    ca, cb = buf[S.cells + a], buf[S.cells + b]
    ja, jb = buf[S.block + a], buf[S.block + b]
    buf[S.cells + a], buf[S.cells + b] = cb, ca
    buf[S.block + a], buf[S.block + b] = jb, ja
    buf[S.loc + jb] = a
    buf[S.loc + ja] = b


@kernel
def _mass_change(buf, S, p, a_old, a_new):
    cw = S.cw
    q0, r0 = a_old // cw, a_old % cw
    q1, r1 = a_new // cw, a_new % cw
    if q1 > q0:
        urn_add_k(buf, S.urn, p)
    elif q1 < q0:
        urn_remove_k(buf, S.urn, p)
    if r1 != r0:
        rtree_update_k(buf, S.rt, p, r1 - r0)


@hot
def ss_size_k(buf, S):
    return buf[S.meta + SIZE]


@hot
def ss_ops_k(buf, S):
    return buf[S.meta + OPS]


@hot
def ss_contains_k(buf, S, e):
    pos = buf[S.loc + (e - 1) // S.cw]
    return (np.uint64(buf[S.cells + pos]) >> np.uint64((e - 1) % S.cw)) & _U1 == _U1


@kernel
def ss_add_k(buf, S, e):
    pos = buf[S.loc + (e - 1) // S.cw]
    bit = _U1 << np.uint64((e - 1) % S.cw)
    x = np.uint64(buf[S.cells + pos])
    if x & bit:
        raise ValueError("element already present")
    p = popcount_k(x)
    buf[S.cells + pos] = np.int64(x | bit)
    # the cell leaves the head of interval p and joins the tail of p+1
    first = buf[S.ib + p]
    _swap(buf, S, pos, first)
    buf[S.ib + p] += 1
    buf[S.isz + p] -= 1
    buf[S.isz + p + 1] += 1
    buf[S.meta + OPS] += UPDATE_COST
    if p >= 1:
        _mass_change(buf, S, p, p * (buf[S.isz + p] + 1), p * buf[S.isz + p])
    n1 = buf[S.isz + p + 1]
    _mass_change(buf, S, p + 1, (p + 1) * (n1 - 1), (p + 1) * n1)
    buf[S.meta + SIZE] += 1


@kernel
def ss_remove_k(buf, S, e):
    pos = buf[S.loc + (e - 1) // S.cw]
    bit = _U1 << np.uint64((e - 1) % S.cw)
    x = np.uint64(buf[S.cells + pos])
    if not x & bit:
        raise ValueError("element not present")
    p = popcount_k(x)
    buf[S.cells + pos] = np.int64(x & ~bit)
    # the cell swaps with the last cell of interval p, which then heads p-1
    last = buf[S.ib + p] + buf[S.isz + p] - 1
    _swap(buf, S, pos, last)
    buf[S.isz + p] -= 1
    buf[S.ib + p - 1] -= 1
    buf[S.isz + p - 1] += 1
    buf[S.meta + OPS] += UPDATE_COST
    n0 = buf[S.isz + p]
    _mass_change(buf, S, p, p * (n0 + 1), p * n0)
    if p >= 2:
        n1 = buf[S.isz + p - 1]
        _mass_change(buf, S, p - 1, (p - 1) * (n1 - 1), (p - 1) * n1)
    buf[S.meta + SIZE] -= 1


@hot
def ss_sample_pop_k(buf, S, rs):
    t_q = S.cw * buf[S.urn.size]
    t_r = rtree_total_k(buf, S.rt)
    buf[S.meta + OPS] += 3
    if uniform_k(rs, t_q + t_r) <= t_q:
        return urn_sample_k(buf, S.urn, rs)
    return rtree_sample_k(buf, S.rt, rs)


@hot
def ss_sample_k(buf, S, rs):
    p = ss_sample_pop_k(buf, S, rs)
    c = buf[S.ib + p] + uniform_k(rs, buf[S.isz + p]) - 1
    bit = select1_k(np.uint64(buf[S.cells + c]), uniform_k(rs, p))
    buf[S.meta + OPS] += 3
    return buf[S.block + c] * S.cw + bit


@kernel
def ss_clear_k(buf, S):
    buf[S.cells:S.cells + S.ncells] = 0
    for j in range(S.ncells):
        buf[S.block + j] = j
        buf[S.loc + j] = j
    buf[S.ib:S.ib + S.cw + 1] = 0
    buf[S.isz:S.isz + S.cw + 1] = 0
    buf[S.isz] = S.ncells
    urn_clear_k(buf, S.urn)
    rtree_clear_k(buf, S.rt)
    buf[S.meta + SIZE] = 0


@kernel
def ss_fill_k(buf, S):
    ss_clear_k(buf, S)
    for e in range(1, S.n + 1):
        ss_add_k(buf, S, e)


@kernel
def ss_rebuild_k(buf, S):
    rt_rebuild_k(buf, S.rt)
    size = 0
    for p in range(1, S.cw + 1):
        size += p * buf[S.isz + p]
    buf[S.meta + SIZE] = size


def ss_layout(arena: Arena, prefix: str, n: int, cellwidth: int | None = None,
              table_budget_entries: int = DEFAULT_TABLE_BUDGET) -> SSLayout:
    cw = cellwidth or log_size(n)
    if not 1 <= cw <= 64:
        raise ValueError("cell width must fit a 64-bit word")
    ncells = -(-n // cw)
    npad = ncells * cw
    return SSLayout(
        cells=arena.alloc(f"{prefix}.cells", ncells),
        block=arena.alloc(f"{prefix}.block", ncells),
        loc=arena.alloc(f"{prefix}.loc", ncells),
        ib=arena.alloc(f"{prefix}.ib", cw + 1),
        isz=arena.alloc(f"{prefix}.isz", cw + 1),
        meta=arena.alloc(f"{prefix}.meta", 2),
        urn=urn_layout(arena, f"{prefix}.urn", ncells, cw),
        # tables are only kept when they fit in about one bit per domain element
        rt=rt_layout(arena, f"{prefix}.rt", cw, table_budget_entries, budget_bits=npad),
        n=n, npad=npad, cw=cw, ncells=ncells,
    )


def ss_init(buf, S: SSLayout):
    """Build lookup tables and clear a freshly allocated sampler."""
    rt_init(buf, S.rt)
    ss_clear_k(buf, S)


def ss_memory(S: SSLayout) -> MemoryAccount:
    acct = MemoryAccount()
    acct.add("cell_bitmaps", S.ncells * S.cw)
    acct.add("cell_block_index", S.ncells * bits_for(S.ncells))
    acct.add("cell_location", S.ncells * bits_for(S.ncells))
    acct.add("intervals", 2 * (S.cw + 1) * bits_for(S.ncells + 1))
    acct.add("size", bits_for(S.n + 1))
    acct.merge("urn", urn_memory(S.urn))
    acct.merge("residues", rt_memory(S.rt))
    return acct


def ss_codec_fields(prefix: str, S: SSLayout) -> list:
    """Non-derived segments of a sampler with their fixed field widths."""
    ptr = bits_for(S.ncells + 1)
    return [
        (f"{prefix}.cells", S.cw),
        (f"{prefix}.block", bits_for(S.ncells)),
        (f"{prefix}.loc", bits_for(S.ncells)),
        (f"{prefix}.ib", ptr),
        (f"{prefix}.isz", ptr),
        *urn_codec_fields(f"{prefix}.urn", S.urn),
        (f"{prefix}.rt.leaf_masses", bits_for(S.rt.b0 + 1)),
    ]


def populations(buf, S: SSLayout) -> dict:
    """a_p for every population p >= 1 with non-zero mass."""
    return {p: p * int(buf[S.isz + p]) for p in range(1, S.cw + 1) if buf[S.isz + p]}


@njit(cache=True)
def ss_audit_k(buf, S, shadow):
    """Return 0 when all invariants hold, else a failure code.

    ``shadow`` is a 0/1 membership array indexed by element (length 0 to skip).
    """
    n, cw, ncells = S.n, S.cw, S.ncells
    for pos in range(ncells):
        j = buf[S.block + pos]
        if j < 0 or j >= ncells or buf[S.loc + j] != pos:
            return 1
    start = 0
    for p in range(cw, -1, -1):
        if buf[S.ib + p] != start:
            return 2
        for pos in range(start, start + buf[S.isz + p]):
            if popcount_k(np.uint64(buf[S.cells + pos])) != p:
                return 3
        start += buf[S.isz + p]
    if start != ncells:
        return 4
    counts = np.zeros(cw + 1, dtype=np.int64)
    for s in range(1, buf[S.urn.size] + 1):
        counts[buf[S.urn.color + s]] += 1
    total = 0
    for p in range(1, cw + 1):
        r = rtree_residue_k(buf, S.rt, p)
        a = p * buf[S.isz + p]
        if counts[p] * cw + r != a or r < 0 or r >= cw:
            return 5
        total += a
    if total != buf[S.meta + SIZE]:
        return 6
    R = S.rt
    for leaf in range(R.k1):
        lt = 0
        for i in range(1, R.k0 + 1):
            lt += buf[R.leaf_masses + leaf * (R.k0 + 1) + i]
        if lt != buf[R.leaf_meta + 2 * leaf]:
            return 7
        if R.k1 > 1 and buf[R.root.masses + leaf + 1] != lt:
            return 8
    for pos in range(ncells):
        x = np.uint64(buf[S.cells + pos])
        base = buf[S.block + pos] * cw
        for b in range(cw):
            present = np.int64((x >> np.uint64(b)) & _U1)
            e = base + b + 1
            if present and e > n:
                return 9
            if shadow.shape[0] > 0 and e <= n and present != shadow[e]:
                return 10
    return 0


AUDIT_MESSAGES = {
    1: "cell_location is not the inverse of the block map",
    2: "interval beginnings are not cumulative",
    3: "a cell sits in the wrong population interval",
    4: "interval sizes do not cover the cell array",
    5: "quotient/residue split disagrees with the intervals",
    6: "population masses do not sum to the set size",
    7: "leaf total drifted from leaf masses",
    8: "root mass drifted from leaf totals",
    9: "phantom padding element marked present",
    10: "membership differs from the shadow set",
}


def ss_audit(buf, S: SSLayout, members=None):
    shadow = np.zeros(0, dtype=np.int64)
    if members is not None:
        shadow = np.zeros(S.n + 1, dtype=np.int64)
        shadow[list(members)] = 1
    code = ss_audit_k(buf, S, shadow)
    if code:
        raise AssertionError(AUDIT_MESSAGES[code])


def ss_distribution(buf, S: SSLayout, cap: int = 1 << 20) -> tuple:
    """Exact law of ``ss_sample_k`` by walking every branch of its pipeline.

    Returns (element -> probability, number of branches visited).
    """
    cw = S.cw
    if buf[S.meta + SIZE] == 0:
        raise EmptySetError("empty set has no distribution")
    urn_n = int(buf[S.urn.size])
    t_q = cw * urn_n
    t_r = int(rtree_total_k(buf, S.rt))
    t = t_q + t_r
    pop_prob = {}
    branches = urn_n
    for s in range(1, urn_n + 1):
        p = int(buf[S.urn.color + s])
        pop_prob[p] = pop_prob.get(p, 0) + Fraction(t_q, t) / urn_n
    if t_r:
        law, used = rtree_distribution(buf, S.rt)
        branches += used
        for p, pr in law.items():
            pop_prob[p] = pop_prob.get(p, 0) + Fraction(t_r, t) * pr
    dist = {}
    for p, pp in pop_prob.items():
        cells = int(buf[S.isz + p])
        branches += cells * p
        if branches > cap:
            raise InfeasibleError(f"more than {cap} branches")
        start = int(buf[S.ib + p])
        for c in range(start, start + cells):
            word = np.uint64(buf[S.cells + c])
            for r in range(1, p + 1):
                e = int(buf[S.block + c]) * cw + int(select1_k(word, r))
                dist[e] = dist.get(e, 0) + pp / (cells * p)
    return dist, branches


@njit(cache=True)
def ss_sample_counts_k(buf, S, rs, count, out):
    for _ in range(count):
        out[ss_sample_k(buf, S, rs)] += 1


class SubsetSampler:
    def __init__(self, n: int, cellwidth: int | None = None):
        if n < 1:
            raise ValueError("universe size must be >= 1")
        self.n = n
        self.arena = Arena()
        self.layout = ss_layout(self.arena, "ss", n, cellwidth)
        self.buf = self.arena.new_buffer()
        ss_init(self.buf, self.layout)

    @property
    def cellwidth(self) -> int:
        return self.layout.cw

    @property
    def size(self) -> int:
        return int(self.buf[self.layout.meta + SIZE])

    def __len__(self):
        return self.size

    def _check(self, e):
        if not 1 <= e <= self.n:
            raise ValueError(f"element {e} outside 1..{self.n}")

    def contains(self, e: int) -> bool:
        self._check(e)
        return bool(ss_contains_k(self.buf, self.layout, e))

    __contains__ = contains

    def add(self, e: int) -> "SubsetSampler":
        if self.contains(e):
            raise DoubleAddError(f"{e} is already a member")
        ss_add_k(self.buf, self.layout, e)
        return self

    def remove(self, e: int) -> "SubsetSampler":
        if not self.contains(e):
            raise AbsentRemoveError(f"{e} is not a member")
        ss_remove_k(self.buf, self.layout, e)
        return self

    def fill(self) -> "SubsetSampler":
        ss_fill_k(self.buf, self.layout)
        return self

    def sample(self, src: RandomSource) -> int:
        if self.size == 0:
            raise EmptySetError("cannot sample from an empty set")
        return int(ss_sample_k(self.buf, self.layout, src.state))

    def sample_counts(self, count: int, src: RandomSource) -> np.ndarray:
        """Histogram (index = element) of ``count`` independent samples."""
        if self.size == 0:
            raise EmptySetError("cannot sample from an empty set")
        out = np.zeros(self.n + 1, dtype=np.int64)
        ss_sample_counts_k(self.buf, self.layout, src.state, count, out)
        return out

    def members(self) -> set:
        return {e for e in range(1, self.n + 1) if ss_contains_k(self.buf, self.layout, e)}

    def populations(self) -> dict:
        return populations(self.buf, self.layout)

    def distribution(self, cap: int = 1 << 20) -> dict:
        return ss_distribution(self.buf, self.layout, cap)[0]

    def audit(self, members: set | None = None):
        ss_audit(self.buf, self.layout, members)

    def memory(self) -> MemoryAccount:
        return ss_memory(self.layout)

    @property
    def ops(self) -> int:
        return int(self.buf[self.layout.meta + OPS])


def ss_new(n: int) -> SubsetSampler:
    return SubsetSampler(n)


def ss_contains(s: SubsetSampler, e: int) -> bool:
    return s.contains(e)


def ss_add(s: SubsetSampler, e: int) -> SubsetSampler:
    return s.add(e)


def ss_remove(s: SubsetSampler, e: int) -> SubsetSampler:
    return s.remove(e)


def ss_sample(s: SubsetSampler, src: RandomSource) -> int:
    return s.sample(src)
