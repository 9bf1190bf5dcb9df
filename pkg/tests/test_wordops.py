import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from lowmem_dealers.wordops import (W, ContractError, NoSuchBitError, RandomSource, mix, popcount, rank1, select1,
                                    uniform)

words = st.integers(0, (1 << 64) - 1)


def bits_of(s):
    return [j for j in range(1, W + 1) if s >> (j - 1) & 1]


def test_popcount_examples():
    assert popcount(0) == 0
    assert popcount((1 << 64) - 1) == 64
    assert popcount(0b1011) == 3


def test_rank_select_examples():
    s = 0b1011  # bits 1, 2, 4
    assert rank1(0, 17) == 0
    assert rank1(s, 3) == 2
    assert select1(s, 3) == 4
    assert select1(1 << 5, 1) == 6


def test_rank_select_exhaustive_16_bit():
    for s in range(1 << 16):
        pos = bits_of(s)
        for j in (1, 5, 9, 16):
            assert rank1(s, j, 16) == sum(p <= j for p in pos)
        for i, p in enumerate(pos, 1):
            assert select1(s, i, 16) == p


@given(words, st.integers(1, 64))
def test_rank_matches_loop(s, j):
    assert rank1(s, j) == sum(p <= j for p in bits_of(s))
    assert rank1(s, W) == popcount(s)


@given(words)
def test_select_matches_loop(s):
    for i, p in enumerate(bits_of(s), 1):
        assert select1(s, i) == p
        assert select1(s, rank1(s, p)) <= p


def test_contract_errors():
    with pytest.raises(ContractError):
        rank1(5, 0)
    with pytest.raises(NoSuchBitError):
        select1(0b11, 3)
    with pytest.raises(ContractError):
        uniform(RandomSource(1), 0)


def test_uniform_singleton_and_range():
    src = RandomSource(3)
    assert all(uniform(src, 1) == 1 for _ in range(100))
    assert {uniform(src, 7) for _ in range(2000)} == set(range(1, 8))
    assert 1 <= uniform(src, 1 << 64) <= 1 << 64


def test_uniform_replay():
    a, b = RandomSource(99), RandomSource(99)
    assert [uniform(a, 1000) for _ in range(50)] == [uniform(b, 1000) for _ in range(50)]
    c = a.clone()
    assert uniform(a, 10 ** 9) == uniform(c, 10 ** 9)


def _counts(x, draws, seed):
    src = RandomSource(seed)
    return np.bincount([uniform(src, x) for _ in range(draws)], minlength=x + 1)[1:], src


def test_uniform_coin():
    counts, _ = _counts(2, 200_000, 5)
    assert abs(counts[0] / counts.sum() - 0.5) < 0.01


def test_uniform_chi_square_and_retries():
    counts, src = _counts(120, 240_000, 6)
    chi = ((counts - 2000) ** 2 / 2000).sum()
    assert chi < stats.chi2.ppf(1 - 1e-4, 119)
    # next power of two is 128: acceptance 120/128
    assert src.uniform_rejections / src.uniform_calls < 1


def test_mix_is_deterministic_and_spreads():
    assert mix(1, 2) == mix(1, 2)
    assert len({mix(7, i) for i in range(1000)}) == 1000
