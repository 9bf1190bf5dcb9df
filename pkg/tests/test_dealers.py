import itertools
from fractions import Fraction

import numpy as np
import pytest

from lowmem_dealers.dealers import (AdaptiveDealer, AuditError, BalancedBits, BitmapDealer, FisherYatesDealer,
                                    NotOpenBookError, PerfectDealer, PRPDealer, adaptive_draw, adaptive_final_draw,
                                    balanced_bit, bitmap_draw, fy_draw, make_dealer, perfect_draw, potential,
                                    prp_draw, string_probability)
from lowmem_dealers.dealers.adaptive import EPSILON, slot_card_k
from lowmem_dealers.dealers.prp import mixer_prf_k
from lowmem_dealers.engine import deal_permutations
from lowmem_dealers.wordops import RandomSource, mix

KINDS = [("bitmap", {}), ("fy", {}), ("perfect", {}), ("adaptive", {"d": 8}), ("prp", {"key": 5})]


def test_single_card_dealers():
    src = RandomSource(0)
    assert bitmap_draw(BitmapDealer(1), src) == 1
    assert fy_draw(FisherYatesDealer(1), src) == 1
    assert perfect_draw(PerfectDealer(1), src) == 1


def test_bitmap_last_card_is_forced():
    d = BitmapDealer(2)
    d.commit(1)
    assert bitmap_draw(d, RandomSource(3)) == 2


def test_fisher_yates_refills_from_the_end():
    d = FisherYatesDealer(3)
    assert d.card(1) == 1
    d.commit(1)
    assert d.array == (3, 2)


@pytest.mark.parametrize("kind,extra", KINDS)
@pytest.mark.parametrize("n", [64, 1024, 1 << 14])
def test_every_game_is_a_permutation(kind, extra, n):
    if kind == "bitmap" and n > 1024:
        pytest.skip("rejection tail makes big bitmap games slow; covered at smaller n")
    rows = deal_permutations(make_dealer(kind, n, **extra), 11, 100 if n < 1 << 14 else 20)
    assert (np.sort(rows, axis=1) == np.arange(1, n + 1)).all()


@pytest.mark.parametrize("kind,extra", KINDS)
def test_same_seed_same_permutation(kind, extra):
    a = deal_permutations(make_dealer(kind, 256, **extra), 4, 3)
    b = deal_permutations(make_dealer(kind, 256, **extra), 4, 3)
    c = deal_permutations(make_dealer(kind, 256, **extra), 5, 3)
    assert (a == b).all()
    if kind != "prp":
        assert (a != c).any()


@pytest.mark.parametrize("cls", [BitmapDealer, FisherYatesDealer, PerfectDealer])
def test_uniform_dealers_have_uniform_laws(cls):
    d = cls(12)
    src = RandomSource(2)
    for _ in range(11):
        law, _ = d.next_distribution()
        avail = d.available()
        assert law == {c: Fraction(1, len(avail)) for c in avail}
        d.draw(src)


@pytest.mark.parametrize("kind,extra", KINDS[:4])
def test_snapshot_restore_continues_identically(kind, extra):
    d = make_dealer(kind, 64, **extra)
    src = RandomSource(6)
    for _ in range(37):
        d.draw(src)
    twin = d.restore(d.snapshot(), d.turn)
    assert twin.snapshot() == d.snapshot() and twin.available() == d.available()
    assert d.snapshot() < 1 << d.state_bits
    a, b = src.clone(), src.clone()
    assert [d.draw(a) for _ in range(27)] == [twin.draw(b) for _ in range(27)]


# adaptive dealer -----------------------------------------------------------

def test_adaptive_first_turn():
    d = AdaptiveDealer(8, 2)
    assert d.threshold(1) == 2
    assert d.drawable() == [1, 2]
    assert d.card(2) == 5
    law, _ = d.next_distribution()
    assert law == {1: Fraction(1, 2), 5: Fraction(1, 2)}


def test_adaptive_threshold_and_stage_start_holes():
    n, d = 1024, 16
    dealer = AdaptiveDealer(n, d)
    assert all(dealer.threshold(1) == 2 for d in (1, 5, 64))
    src = RandomSource(1)
    for t in range(1, n - 2 * d + 1):
        if (t - 1) % d == 0:
            assert sum(dealer.holes()) == 2 * d
        dealer.audit()
        adaptive_draw(dealer, src)
    with pytest.raises(AuditError):
        adaptive_draw(dealer, src)
    while dealer.turn < n:
        adaptive_final_draw(dealer, src)
        dealer.audit()


def test_adaptive_invariant_scan_matches_python_audit():
    dealer = AdaptiveDealer(512, 16)
    report = dealer.invariant_scan(RandomSource(3))
    assert report["violations"] == 0
    assert 16 <= report["min_total"] <= report["max_total"] <= 32 and report["min_hole"] >= 0


def test_two_card_final_phase_is_a_fair_coin():
    d = AdaptiveDealer(2, 1)
    assert d.in_final_phase
    law, _ = d.next_distribution()
    assert law == {1: Fraction(1, 2), 2: Fraction(1, 2)}


def test_final_phase_first_draw_is_uniform():
    n, d = 256, 16
    dealer = AdaptiveDealer(n, d)
    src = RandomSource(12)
    while dealer.turn < n - 2 * d:
        dealer.draw(src)
    law, _ = dealer.next_distribution()
    remaining = dealer.available()
    assert law == {c: Fraction(1, 2 * d) for c in remaining}
    counts = dict.fromkeys(remaining, 0)
    for s in range(100_000):
        counts[dealer.clone().draw(RandomSource(mix(99, s)))] += 1
    from scipy import stats
    chi = sum((c - 100_000 / (2 * d)) ** 2 / (100_000 / (2 * d)) for c in counts.values())
    assert chi < stats.chi2.ppf(1 - 1e-4, 2 * d - 1)


def test_slot_blocks_and_leaders():
    n, d = 512, 32
    dealer = AdaptiveDealer(n, d)
    src = RandomSource(8)
    while dealer.turn < n - 2 * d:
        dealer.draw(src)
    L, g = dealer.layout, dealer.slot_width
    slots = dealer._tracked_slots()
    deck_of = {e: (int(slot_card_k(dealer.buf, L, e)) - 1) // dealer.deck_size + 1 for e in slots}
    # each block's population counts its tracked cards
    for blk in range(dealer.blocks):
        members = [e for e in slots if (e - 1) // g == blk]
        assert len(members) <= g
    # a deck leads when it is the first deck to begin in its block
    first_slot = {}
    for e in range(1, dealer.blocks * g + 1):
        if dealer.buf[L.fbits + (e - 1) // g] >> ((e - 1) % g) & 1:
            deck = len(first_slot) + 1
            first_slot[deck] = e
    leaders = set()
    seen_blocks = set()
    for deck in sorted(first_slot):
        blk = (first_slot[deck] - 1) // g
        if blk not in seen_blocks:
            leaders.add(deck)
            seen_blocks.add(blk)
    bitmap = {i for i in range(1, d + 1) if dealer.buf[L.leaders + (i - 1) // 64] >> ((i - 1) % 64) & 1}
    assert bitmap == leaders
    assert set(deck_of.values()) <= set(first_slot)


def test_potential_formula():
    d = AdaptiveDealer(64, 8)
    assert potential(d) == pytest.approx(8 * (1 + EPSILON) ** 2)
    d.holes = lambda: [16] + [0] * 7
    assert d.potential() == pytest.approx((1 + EPSILON) ** 16 + 7)


def test_stage_end_potential_stays_in_budget():
    n, d = 512, 16
    stages = (n - 2 * d) // d
    acc = np.zeros(stages)
    dealer = AdaptiveDealer(n, d)
    for run in range(100):
        dealer.reset()
        src = RandomSource(mix(run, 0))
        for t in range(1, n - 2 * d + 1):
            dealer.draw(src)
            if t % d == 0:
                acc[t // d - 1] += dealer.potential() / d
    assert (acc / 100).max() <= 1.02


@pytest.mark.parametrize("d", [16, 64, 256, 512])
def test_adaptive_memory_per_deck(d):
    dealer = AdaptiveDealer(1 << 14, d)
    assert dealer.peak_memory_bits(RandomSource(d)) / d <= 128


def test_adaptive_rejection_mode_matches_law():
    dealer = AdaptiveDealer(64, 4, rejection=True)
    src = RandomSource(2)
    while dealer.turn < 64:
        dealer.audit()
        dealer.draw(src)


# PRP and balanced strings ---------------------------------------------------

def test_prp_bijection_and_identity():
    d = PRPDealer(1000, key=123)
    assert sorted(d.permute(t) for t in range(1, 1001)) == list(range(1, 1001))
    zero = PRPDealer(50, key=9, rounds=0)
    assert [prp_draw(zero) for _ in range(50)] == list(range(1, 51))


def test_prp_recurse_and_custom_prf():
    for recurse in (False, True):
        d = PRPDealer(300, key=77, recurse=recurse)
        assert sorted(d.permute(t) for t in range(1, 301)) == list(range(1, 301))
    mixer = PRPDealer(97, key=5, prf=lambda k, a, b: int(mixer_prf_k(np.uint64(k), a, b)))
    plain = PRPDealer(97, key=5)
    assert [mixer.permute(t) for t in range(1, 98)] == [plain.permute(t) for t in range(1, 98)]


def test_prp_is_not_open_book():
    d = PRPDealer(10, key=1)
    with pytest.raises(NotOpenBookError):
        d.choice_support()
    for _ in range(10):
        d.draw()
    with pytest.raises(AuditError):
        d.draw()


def test_balanced_bits_edge_rules():
    b = BalancedBits(3)
    src = RandomSource(0)
    b.t, b.ones = 3, 3
    assert [balanced_bit(b, src) for _ in range(3)] == [0, 0, 0]
    last = BalancedBits(4)
    last.t, last.ones = 7, 3
    assert last.one_probability() == 1 and balanced_bit(last, src) == 1


def test_balanced_strings_exact():
    n = 4
    strings = [s for s in itertools.product((0, 1), repeat=2 * n) if sum(s) == n]
    assert len(strings) == 70
    assert all(string_probability(s) == Fraction(1, 70) for s in strings)
    assert string_probability((1, 1, 1, 1, 1, 0, 0, 0)) == 0
