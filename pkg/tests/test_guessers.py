import pytest
from hypothesis import given, strategies as st

from lowmem_dealers.dealers import AdaptiveDealer, FisherYatesDealer, PerfectDealer, PRPDealer, make_dealer
from lowmem_dealers.dealers.base import NotOpenBookError
from lowmem_dealers.engine import play_game
from lowmem_dealers.guessers import (ExactMyopicGuesser, default_sims, exact_myopic_guess, make_guesser,
                                     remembering_guess, sim_myopic_guess)
from lowmem_dealers.subset_sampler import InfeasibleError
from lowmem_dealers.wordops import RandomSource, mix


def test_remembering_guess_picks_the_missing_card():
    assert remembering_guess(2, [1], RandomSource(0)) == 2
    assert remembering_guess(3, [(1, 3), (3, 1)], RandomSource(5)) == 2


@given(st.integers(2, 40), st.integers(0, 2**32))
def test_remembering_guess_is_never_a_drawn_card(n, seed):
    src = RandomSource(seed)
    drawn = list(range(1, n, 2))
    assert remembering_guess(n, drawn, src) not in drawn


def test_remembering_guess_is_uniform():
    src = RandomSource(17)
    counts = dict.fromkeys([1, 3, 4, 6, 7, 8], 0)
    for _ in range(60_000):
        counts[remembering_guess(8, [2, 5], src)] += 1
    assert all(abs(c - 10_000) < 500 for c in counts.values())


def test_exact_myopic_examples():
    assert exact_myopic_guess(FisherYatesDealer(3)) == 1
    assert exact_myopic_guess(AdaptiveDealer(8, 2)) == 1
    d = PerfectDealer(5)
    src = RandomSource(2)
    for _ in range(4):
        d.draw(src)
    assert exact_myopic_guess(d) == min(d.available())


def test_exact_myopic_reports_infeasible_and_closed_book():
    with pytest.raises(InfeasibleError):
        ExactMyopicGuesser(cap=1).guess(PerfectDealer(16), [])
    with pytest.raises(NotOpenBookError):
        exact_myopic_guess(PRPDealer(8, key=1))


def test_heavy_element_bound_along_a_game():
    g = ExactMyopicGuesser()
    d = AdaptiveDealer(64, 4)
    src = RandomSource(9)
    while d.turn < d.n:
        g.guess(d, [])
        assert float(g.last_probability) >= 2.0 ** -g.last_entropy - 1e-12
        d.draw(src)


def test_sim_guess_forced_move():
    d = PerfectDealer(6)
    src = RandomSource(4)
    for _ in range(5):
        d.draw(src)
    for k in (1, 7, 1000):
        assert sim_myopic_guess(d, None, k, RandomSource(k)) == min(d.available())


@pytest.mark.parametrize("n,d", [(64, 4), (128, 8)])
def test_sim_guess_lands_on_an_exact_maximizer(n, d):
    hits = turns = 0
    for s in range(3):
        dealer = AdaptiveDealer(n, d)
        src, gsrc = RandomSource(mix(s, 0)), RandomSource(mix(s, 1))
        while dealer.turn < n:
            law, _ = dealer.next_distribution()
            top = max(law.values())
            g = sim_myopic_guess(dealer, None, 1000, gsrc)
            hits += law[g] == top
            turns += 1
            # with a unique maximizer the labels themselves must agree
            if sum(p == top for p in law.values()) == 1:
                assert g == exact_myopic_guess(dealer)
            dealer.draw(src)
    assert hits / turns >= 0.9


def test_single_simulation_samples_the_dealer_law():
    d = AdaptiveDealer(8, 2)
    law, _ = d.next_distribution()
    src = RandomSource(31)
    counts = dict.fromkeys(law, 0)
    for _ in range(20_000):
        counts[sim_myopic_guess(d, None, 1, src)] += 1
    assert set(counts) == {1, 5}
    assert abs(counts[1] - 10_000) < 400


def test_default_simulation_budget():
    assert default_sims(3) == 48 and default_sims(10_000) == 1000


@pytest.mark.parametrize("guesser", ["remember", "myopic-exact", "myopic-sim"])
@pytest.mark.parametrize("kind,extra", [("perfect", {}), ("adaptive", {"d": 4}), ("bitmap", {})])
def test_guesses_are_always_available(guesser, kind, extra):
    dealer = make_dealer(kind, 32, **extra)
    g = make_guesser(guesser, k_sims=50)
    for seed in range(3):
        assert play_game(dealer, g, seed).audit()
