from fractions import Fraction

import numpy as np
import pytest

from lowmem_dealers.dealers import AuditError, PerfectDealer, make_dealer
from lowmem_dealers.dealers.base import NotOpenBookError
from lowmem_dealers.engine import GameConfig, Transcript, play_game, run_trials, trial_seed
from lowmem_dealers.guessers import make_guesser
from lowmem_dealers.memory import MemoryAccount


def test_one_card_game():
    tr = play_game(PerfectDealer(1), make_guesser("remember"), 3)
    assert tr.pairs == [(1, 1)] and tr.score == 1


def test_two_card_expected_score():
    # guess 1 hits with probability 1/2, guess 2 always hits
    expected = Fraction(1) + Fraction(1, 2)
    st = run_trials(GameConfig(dealer="perfect", n=2, trials=40_000, seed=1))
    assert abs(st.mean - float(expected)) < 4 * st.std / np.sqrt(st.trials)


def test_replay_is_deterministic():
    dealer, g = make_dealer("adaptive", 64, d=4), make_guesser("myopic-sim", 20)
    a, b = play_game(dealer, g, 77), play_game(dealer, g, 77)
    assert a == b


def test_single_trial_flags_undefined_spread():
    st = run_trials(GameConfig(n=16, trials=1))
    assert not st.std_defined and st.std == 0


@pytest.mark.parametrize("dealer,guesser,d", [("perfect", "remember", None), ("adaptive", "remember", 4),
                                              ("bitmap", "remember", None), ("fy", "myopic-sim", None),
                                              ("adaptive", "myopic-sim", 4), ("prp", "remember", None)])
def test_batch_scores_match_python_games(dealer, guesser, d):
    cfg = GameConfig(dealer=dealer, guesser=guesser, n=64, d=d, trials=12, seed=8, k_sims=30)
    st = run_trials(cfg)
    ref = [play_game(cfg.make_dealer(), cfg.make_guesser(), trial_seed(8, i)).score for i in range(12)]
    assert list(st.scores) == ref


def test_hit_rates_sum_to_mean():
    st = run_trials(GameConfig(dealer="adaptive", n=128, d=8, trials=50, seed=2))
    assert st.hit_rates.sum() == pytest.approx(st.mean)


@pytest.mark.parametrize("bad", [dict(trials=0), dict(n=0), dict(dealer="adaptive", d=None),
                                 dict(dealer="adaptive", n=10, d=3), dict(dealer="adaptive", n=8, d=8),
                                 dict(k_sims=0)])
def test_invalid_configs(bad):
    with pytest.raises(ValueError):
        GameConfig(**{"n": 64, **bad}).validate()


def test_closed_book_dealer_rejects_myopic_guessers():
    with pytest.raises(NotOpenBookError):
        GameConfig(dealer="prp", guesser="myopic-sim").validate()


def test_transcript_audit_catches_bad_games():
    with pytest.raises(AuditError):
        Transcript(3, 0, [1, 2, 3], [1, 1, 2]).audit()
    with pytest.raises(AuditError):
        Transcript(3, 0, [1, 1, 3], [1, 2, 3]).audit()


def test_memory_account_totals():
    acct = MemoryAccount({"a": 3, "b": 4})
    assert acct.total == 7
