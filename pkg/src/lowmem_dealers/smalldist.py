"""Dynamic bounded-mass distributions over small supports.

``BoundedMassDist`` keeps k masses in [0..b] and samples outcome i with
probability a_i / total. When a precomputed table fits the entry budget,
sampling is one lookup keyed by (mass vector, u); otherwise it is a prefix
scan over at most k masses.

``ResidueTree`` spreads log n outcomes over a depth-2 tree: a root over k1
leaves, each leaf a BoundedMassDist over k0 outcomes.
"""
import math
from collections import namedtuple
from fractions import Fraction

import numpy as np
from numba import njit

from .arena import Arena, hot, kernel
from .memory import MemoryAccount, bits_for
from .wordops import RandomSource, uniform_k

DEFAULT_TABLE_BUDGET = 1 << 20

BMDLayout = namedtuple("BMDLayout", "masses meta table powv k b has_table")
# meta segment: [total, code]; the code is the mass vector in base b+1
RTLayout = namedtuple("RTLayout", "leaf_masses leaf_meta leaf_table leaf_powv root log_n k0 k1 b0 b1 leaf_has_table")
# leaf j (0-based) keeps masses at leaf_masses + j*(k0+1) + 1..k0 and [total, code] at leaf_meta + 2j


class MassBoundError(ValueError):
    pass


class ZeroMassError(ValueError):
    pass


# compiled kernels ------------------------------------------------------

@hot
def scan_pick_k(buf, masses, k, u):
    acc = 0
    for j in range(1, k + 1):
        acc += buf[masses + j]
        if acc >= u:
            return j
    return 0


@hot
def pick_k(buf, masses, meta, table, k, b, has_table, u):
    if has_table:
        return buf[table + buf[meta + 1] * (b * k) + u - 1]
    return scan_pick_k(buf, masses, k, u)


@kernel
def mass_update_k(buf, masses, meta, powv, b, has_table, i, delta):
    new = buf[masses + i] + delta
    if new < 0 or new > b:
        raise ValueError("mass bound violated")
    buf[masses + i] = new
    buf[meta] += delta
    if has_table:
        buf[meta + 1] += delta * buf[powv + i]


@hot
def bmd_pick_k(buf, D, u):
    return pick_k(buf, D.masses, D.meta, D.table, D.k, D.b, D.has_table, u)


@hot
def bmd_sample_k(buf, D, rs):
    return bmd_pick_k(buf, D, uniform_k(rs, buf[D.meta]))


@kernel
def bmd_update_k(buf, D, i, delta):
    mass_update_k(buf, D.masses, D.meta, D.powv, D.b, D.has_table, i, delta)


@njit(cache=True)
def build_table_k(buf, table, powv, k, b, ncodes):
    width = b * k
    base = b + 1
    masses = np.zeros(k + 1, dtype=np.int64)
    for i in range(1, k + 1):
        buf[powv + i] = base ** (i - 1)
    for code in range(ncodes):
        c = code
        for i in range(1, k + 1):
            masses[i] = c % base
            c //= base
        j = 1
        acc = masses[1]
        for u in range(1, width + 1):
            while acc < u and j < k:
                j += 1
                acc += masses[j]
            buf[table + code * width + u - 1] = j if acc >= u else 0


@kernel
def rtree_update_k(buf, R, p, delta):
    leaf = (p - 1) // R.k0
    i = (p - 1) % R.k0 + 1
    masses = R.leaf_masses + leaf * (R.k0 + 1)
    new = buf[masses + i] + delta
    if new < 0 or new >= R.b0:
        raise ValueError("residue mass outside [0, b0)")
    mass_update_k(buf, masses, R.leaf_meta + 2 * leaf, R.leaf_powv, R.b0, R.leaf_has_table, i, delta)
    if R.k1 > 1:
        bmd_update_k(buf, R.root, leaf + 1, delta)


@hot
def rtree_residue_k(buf, R, p):
    return buf[R.leaf_masses + ((p - 1) // R.k0) * (R.k0 + 1) + (p - 1) % R.k0 + 1]


@hot
def rtree_total_k(buf, R):
    if R.k1 > 1:
        return buf[R.root.meta]
    return buf[R.leaf_meta]


@hot
def rtree_sample_k(buf, R, rs):
    leaf = 0
    if R.k1 > 1:
        leaf = bmd_sample_k(buf, R.root, rs) - 1
    masses = R.leaf_masses + leaf * (R.k0 + 1)
    meta = R.leaf_meta + 2 * leaf
    u = uniform_k(rs, buf[meta])
    i = pick_k(buf, masses, meta, R.leaf_table, R.k0, R.b0, R.leaf_has_table, u)
    return leaf * R.k0 + i


@kernel
def rtree_clear_k(buf, R):
    buf[R.leaf_masses:R.leaf_masses + R.k1 * (R.k0 + 1)] = 0
    buf[R.leaf_meta:R.leaf_meta + 2 * R.k1] = 0
    if R.k1 > 1:
        buf[R.root.masses:R.root.masses + R.k1 + 1] = 0
        buf[R.root.meta] = 0
        buf[R.root.meta + 1] = 0


@kernel
def rt_rebuild_k(buf, R):
    """Recompute totals, table codes and root masses from the leaf masses."""
    k0, k1 = R.k0, R.k1
    root = R.root
    if k1 > 1:
        buf[root.meta] = 0
        buf[root.meta + 1] = 0
    for leaf in range(k1):
        meta = R.leaf_meta + 2 * leaf
        masses = R.leaf_masses + leaf * (k0 + 1)
        buf[meta] = 0
        buf[meta + 1] = 0
        for i in range(1, k0 + 1):
            a = buf[masses + i]
            buf[meta] += a
            if R.leaf_has_table:
                buf[meta + 1] += a * buf[R.leaf_powv + i]
        if k1 > 1:
            buf[root.masses + leaf + 1] = buf[meta]
            buf[root.meta] += buf[meta]
            if root.has_table:
                buf[root.meta + 1] += buf[meta] * buf[root.powv + leaf + 1]


# construction ----------------------------------------------------------

def table_entries(k: int, b: int) -> int:
    return (b + 1) ** k * (b * k)


def _table_fits(k, b, budget_entries, budget_bits=None) -> bool:
    entries = table_entries(k, b)
    ok = entries <= budget_entries
    if budget_bits is not None:
        ok = ok and entries * bits_for(k + 1) <= budget_bits
    return ok


def _alloc_table(arena, prefix, k, b, built):
    if built:
        return arena.alloc(f"{prefix}.table", table_entries(k, b)), arena.alloc(f"{prefix}.powv", k + 1)
    return 0, 0


def bmd_layout(arena: Arena, prefix: str, k: int, b: int, budget_entries=DEFAULT_TABLE_BUDGET,
               budget_bits=None) -> BMDLayout:
    built = _table_fits(k, b, budget_entries, budget_bits)
    masses = arena.alloc(f"{prefix}.masses", k + 1)
    meta = arena.alloc(f"{prefix}.meta", 2)
    table, powv = _alloc_table(arena, prefix, k, b, built)
    return BMDLayout(masses, meta, table, powv, k, b, int(built))


def bmd_init(buf, D: BMDLayout):
    """Fill the lookup table (when present) of a fresh layout."""
    if D.has_table:
        build_table_k(buf, D.table, D.powv, D.k, D.b, (D.b + 1) ** D.k)


def bmd_memory(D: BMDLayout, include_table=True) -> MemoryAccount:
    acct = MemoryAccount()
    acct.add("masses", D.k * bits_for(D.b + 1))
    acct.add("total", bits_for(D.b * D.k + 1))
    if D.has_table:
        acct.add("code", bits_for((D.b + 1) ** D.k))
        if include_table:
            acct.add("table", table_entries(D.k, D.b) * bits_for(D.k + 1))
    return acct


def log_size(n_domain: int) -> int:
    """Cell width / residue outcome count for a domain of n elements."""
    return max(1, (n_domain - 1).bit_length())


def rtree_params(n_domain: int) -> tuple:
    """(k0, k1, b0, b1) for a residue tree over log n outcomes."""
    lg = log_size(n_domain)
    if lg <= 2:
        k0, k1 = lg, 1
    else:
        loglog = math.ceil(math.log2(lg))
        k0 = max(1, lg // (2 * loglog))
        k1 = -(-lg // k0)
    return k0, k1, lg, lg * k0


def rt_layout(arena: Arena, prefix: str, log_n: int, budget_entries=DEFAULT_TABLE_BUDGET,
              budget_bits=None) -> RTLayout:
    k0, k1, b0, b1 = rtree_params(1 << log_n if log_n > 0 else 1)
    # one leaf table serves every leaf
    built = _table_fits(k0, b0, budget_entries, budget_bits)
    leaf_masses = arena.alloc(f"{prefix}.leaf_masses", k1 * (k0 + 1))
    leaf_meta = arena.alloc(f"{prefix}.leaf_meta", 2 * k1)
    table, powv = _alloc_table(arena, f"{prefix}.leaf", k0, b0, built)
    if k1 > 1:
        root = bmd_layout(arena, f"{prefix}.root", k1, b1, budget_entries, budget_bits)
    else:
        root = BMDLayout(0, 0, 0, 0, 1, 1, 0)
    return RTLayout(leaf_masses, leaf_meta, table, powv, root, log_n, k0, k1, b0, b1, int(built))


def rt_init(buf, R: RTLayout):
    if R.leaf_has_table:
        build_table_k(buf, R.leaf_table, R.leaf_powv, R.k0, R.b0, (R.b0 + 1) ** R.k0)
    if R.k1 > 1:
        bmd_init(buf, R.root)


def rt_memory(R: RTLayout) -> MemoryAccount:
    acct = MemoryAccount()
    leaf = bmd_memory(BMDLayout(0, 0, 0, 0, R.k0, R.b0, R.leaf_has_table), include_table=False)
    for name, bits in leaf.breakdown.items():
        acct.add(f"leaves.{name}", bits * R.k1)
    if R.leaf_has_table:
        acct.add("leaf_table", table_entries(R.k0, R.b0) * bits_for(R.k0 + 1))
    if R.k1 > 1:
        acct.merge("root", bmd_memory(R.root))
    return acct


def _pick_all(buf, masses, meta, table, k, b, has_table):
    """Enumerate u over [1..total] through the sampler's own pick routine."""
    total = int(buf[meta])
    out = {}
    for u in range(1, total + 1):
        j = int(pick_k(buf, masses, meta, table, k, b, has_table, u))
        out[j] = out.get(j, 0) + 1
    return {j: Fraction(c, total) for j, c in out.items()}, total


def rtree_distribution(buf, R: RTLayout) -> tuple:
    """Exact outcome law of ``rtree_sample_k``: (outcome -> probability, branches)."""
    branches = 0
    if R.k1 > 1:
        D = R.root
        leaf_law, branches = _pick_all(buf, D.masses, D.meta, D.table, D.k, D.b, D.has_table)
    else:
        leaf_law = {1: Fraction(1)}
    out = {}
    for leaf, pl in leaf_law.items():
        masses = R.leaf_masses + (leaf - 1) * (R.k0 + 1)
        meta = R.leaf_meta + 2 * (leaf - 1)
        law, used = _pick_all(buf, masses, meta, R.leaf_table, R.k0, R.b0, R.leaf_has_table)
        branches += used
        for i, pi in law.items():
            out[(leaf - 1) * R.k0 + i] = pl * pi
    return out, branches


# Python surface --------------------------------------------------------

class BoundedMassDist:
    def __init__(self, k: int, b: int, table_budget_entries: int = DEFAULT_TABLE_BUDGET):
        if k < 1 or b < 1:
            raise ValueError("need k >= 1 and b >= 1")
        self.k, self.b = k, b
        self.arena = Arena()
        self.layout = bmd_layout(self.arena, "bmd", k, b, table_budget_entries)
        self.buf = self.arena.new_buffer()
        bmd_init(self.buf, self.layout)

    @property
    def has_table(self) -> bool:
        return bool(self.layout.has_table)

    @property
    def table_size(self) -> int:
        return table_entries(self.k, self.b) if self.has_table else 0

    @property
    def masses(self) -> tuple:
        m = self.layout.masses
        return tuple(int(a) for a in self.buf[m + 1:m + self.k + 1])

    @property
    def total(self) -> int:
        return int(self.buf[self.layout.meta])

    def update(self, i: int, delta: int) -> "BoundedMassDist":
        if not 1 <= i <= self.k:
            raise IndexError(f"outcome {i} outside 1..{self.k}")
        if not 0 <= self.masses[i - 1] + delta <= self.b:
            raise MassBoundError(f"mass of outcome {i} would leave [0, {self.b}]")
        bmd_update_k(self.buf, self.layout, i, delta)
        return self

    def pick(self, u: int) -> int:
        """Least j whose prefix mass reaches u (the table route when present)."""
        return int(bmd_pick_k(self.buf, self.layout, u))

    def scan(self, u: int) -> int:
        return int(scan_pick_k(self.buf, self.layout.masses, self.k, u))

    def sample(self, src: RandomSource) -> int:
        if self.total < 1:
            raise ZeroMassError("distribution has no mass")
        return int(bmd_sample_k(self.buf, self.layout, src.state))

    def memory(self) -> MemoryAccount:
        return bmd_memory(self.layout)


class ResidueTree:
    def __init__(self, n_domain: int, table_budget_entries: int = DEFAULT_TABLE_BUDGET):
        self.log_n = log_size(n_domain)
        self.k0, self.k1, self.b0, self.b1 = rtree_params(n_domain)
        self.arena = Arena()
        self.layout = rt_layout(self.arena, "rt", self.log_n, table_budget_entries)
        self.buf = self.arena.new_buffer()
        rt_init(self.buf, self.layout)

    @property
    def residues(self) -> tuple:
        return tuple(int(rtree_residue_k(self.buf, self.layout, p)) for p in range(1, self.log_n + 1))

    @property
    def total(self) -> int:
        return int(rtree_total_k(self.buf, self.layout))

    def leaf_totals(self) -> tuple:
        m = self.layout.leaf_meta
        return tuple(int(self.buf[m + 2 * j]) for j in range(self.k1))

    def root_masses(self) -> tuple:
        if self.k1 == 1:
            return (self.total,)
        m = self.layout.root.masses
        return tuple(int(a) for a in self.buf[m + 1:m + self.k1 + 1])

    def update(self, p: int, delta: int) -> "ResidueTree":
        if not 1 <= p <= self.log_n:
            raise IndexError(f"residue outcome {p} outside 1..{self.log_n}")
        cur = self.residues[p - 1]
        if not 0 <= cur + delta < self.b0:
            raise MassBoundError(f"residue {p} would leave [0, {self.b0})")
        rtree_update_k(self.buf, self.layout, p, delta)
        return self

    def sample(self, src: RandomSource) -> int:
        if self.total < 1:
            raise ZeroMassError("residue tree has no mass")
        return int(rtree_sample_k(self.buf, self.layout, src.state))

    def distribution(self) -> dict:
        return rtree_distribution(self.buf, self.layout)[0]

    def memory(self) -> MemoryAccount:
        return rt_memory(self.layout)


def bmd_new(k: int, b: int, table_budget_entries: int = DEFAULT_TABLE_BUDGET) -> BoundedMassDist:
    return BoundedMassDist(k, b, table_budget_entries)


def bmd_update(d: BoundedMassDist, i: int, delta: int) -> BoundedMassDist:
    return d.update(i, delta)


def bmd_sample(d: BoundedMassDist, src: RandomSource) -> int:
    return d.sample(src)


def rtree_new(n_domain: int, table_budget_entries: int = DEFAULT_TABLE_BUDGET) -> ResidueTree:
    return ResidueTree(n_domain, table_budget_entries)


def rtree_update(t: ResidueTree, p: int, delta: int) -> ResidueTree:
    return t.update(p, delta)


def rtree_sample(t: ResidueTree, src: RandomSource) -> int:
    return t.sample(src)
