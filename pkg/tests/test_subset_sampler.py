import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from lowmem_dealers.subset_sampler import (AbsentRemoveError, DoubleAddError, EmptySetError, SubsetSampler, ss_add,
                                           ss_contains, ss_new, ss_remove, ss_sample)
from lowmem_dealers.wordops import RandomSource


def test_empty():
    s = ss_new(64)
    assert not any(ss_contains(s, e) for e in range(1, 65))
    with pytest.raises(EmptySetError):
        ss_sample(s, RandomSource(0))


def test_errors():
    s = ss_add(ss_new(10), 3)
    with pytest.raises(DoubleAddError):
        s.add(3)
    with pytest.raises(AbsentRemoveError):
        s.remove(4)
    with pytest.raises(ValueError):
        s.contains(11)


def test_first_add_moves_cell_to_population_one():
    s = ss_add(ss_new(64), 17)
    assert s.populations() == {1: 1}
    s.audit({17})


def test_removal_swaps_with_interval_end():
    s = SubsetSampler(64, cellwidth=4)
    L = s.layout
    for blk in range(6):
        s.add(4 * blk + 1).add(4 * blk + 2)
    # six cells of population 2 occupy positions 0..5
    third = 2
    pos = int(s.buf[L.loc + third])
    last = int(s.buf[L.ib + 2] + s.buf[L.isz + 2] - 1)
    moved = int(s.buf[L.block + last])
    s.remove(4 * third + 1)
    assert int(s.buf[L.loc + third]) == last == int(s.buf[L.ib + 1])
    assert int(s.buf[L.loc + moved]) == pos
    s.audit({4 * b + j for b in range(6) for j in (1, 2)} - {4 * third + 1})


def test_singleton_and_memory():
    s = ss_add(ss_new(100), 5)
    src = RandomSource(1)
    assert {ss_sample(s, src) for _ in range(100)} == {5}
    big = ss_new(1 << 16)
    assert big.memory().total <= 16 * (1 << 16)


@given(st.lists(st.integers(1, 96), max_size=400), st.integers(1, 8))
def test_shadow_set(ops, cw):
    s, shadow = SubsetSampler(96, cellwidth=cw), set()
    for e in ops:
        if e in shadow:
            ss_remove(s, e)
            shadow.discard(e)
        else:
            ss_add(s, e)
            shadow.add(e)
        s.audit(shadow)
    assert s.members() == shadow and s.size == len(shadow)
    # population masses add up to the set size
    assert sum(s.populations().values()) == len(shadow)


@given(st.sets(st.integers(1, 200), min_size=1, max_size=60))
def test_exact_law_is_uniform(members):
    s = SubsetSampler(200)
    for e in members:
        s.add(e)
    assert s.distribution() == {e: Fraction(1, len(members)) for e in members}


def test_full_domain_chi_square():
    s = ss_new(64).fill()
    counts = s.sample_counts(1_000_000, RandomSource(3))[1:]
    chi = ((counts - 1e6 / 64) ** 2 / (1e6 / 64)).sum()
    assert chi < stats.chi2.ppf(1 - 1e-4, 63)


def test_scattered_seventeen():
    rng = random.Random(17)
    s = SubsetSampler(256)
    members = set()
    # mixed populations: some cells dense, some with one member
    for cell in rng.sample(range(32), 9):
        for e in rng.sample(range(1, 9), rng.randint(1, 3)):
            if len(members) < 17:
                members.add(cell * 8 + e)
    while len(members) < 17:
        members.add(rng.randint(1, 256))
    for e in members:
        s.add(e)
    counts = s.sample_counts(1_000_000, RandomSource(4))
    assert len(set(s.populations())) > 1
    assert max(abs(counts[e] / 1e6 - 1 / 17) for e in members) < 0.005


def test_ops_per_operation_bounded_independent_of_n():
    worst = set()
    for exp in range(8, 17, 2):
        n = 1 << exp
        s, rng = ss_new(n), random.Random(exp)
        members, peak = [], 0
        for _ in range(3000):
            before = s.ops
            if members and rng.random() < 0.4:
                s.remove(members.pop(rng.randrange(len(members))))
            else:
                e = rng.randint(1, n)
                if s.contains(e):
                    continue
                s.add(e)
                members.append(e)
            peak = max(peak, s.ops - before)
            if members:
                before = s.ops
                s.sample(RandomSource(exp))
                peak = max(peak, s.ops - before)
        worst.add(peak)
    assert worst == {10}
