"""Game loop, transcripts, trial statistics and instrumentation."""
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .dealers import make_dealer
from .dealers.base import AuditError, Dealer, NotOpenBookError
from .dealers.protocol import dealer_card, dealer_choose, dealer_commit, dealer_ops, dealer_reset
from .guessers import (Guesser, g_observe_k, g_reset_k, guesser_state, make_guesser, remember_guess_k,
                       sim_guess_k)
from .memory import MemoryAccount
from .wordops import RS_CALLS, RS_REJECTS, RandomSource, mix, seed_state_k

__all__ = ["GameConfig", "GameStats", "MemoryAccount", "Transcript", "deal_permutations", "play_game", "run_trials",
           "trial_seed"]

REMEMBER, SIM = 0, 1


@dataclass
class Transcript:
    n: int
    seed: int
    guesses: list = field(default_factory=list)
    draws: list = field(default_factory=list)

    @property
    def pairs(self) -> list:
        return list(zip(self.guesses, self.draws))

    @property
    def score(self) -> int:
        return sum(g == d for g, d in zip(self.guesses, self.draws))

    def audit(self):
        """Draws form a permutation and every guess was undrawn when made."""
        if sorted(self.draws) != list(range(1, self.n + 1)):
            raise AuditError("draws are not a permutation of the deck")
        drawn = set()
        for g, d in zip(self.guesses, self.draws):
            if g in drawn:
                raise AuditError(f"guess {g} was already drawn")
            drawn.add(d)
        return True


@dataclass
class GameConfig:
    dealer: str = "perfect"
    guesser: str = "remember"
    n: int = 1024
    d: int | None = None
    trials: int = 1000
    seed: int = 0
    k_sims: int | None = None
    rounds: int | None = None
    key: int = 0
    rejection: bool = False

    def validate(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.dealer == "adaptive":
            if self.d is None or self.d < 1:
                raise ValueError("the adaptive dealer needs d >= 1")
            if self.n % self.d or self.n < 2 * self.d:
                raise ValueError("the adaptive dealer needs d dividing n and n >= 2d")
        if self.k_sims is not None and self.k_sims < 1:
            raise ValueError("k_sims must be >= 1")
        if self.guesser != "remember" and self.dealer == "prp":
            raise NotOpenBookError("myopic guessers need an open-book dealer")

    def make_dealer(self) -> Dealer:
        return make_dealer(self.dealer, self.n, d=self.d, rounds=self.rounds, key=self.key,
                           rejection=self.rejection)

    def make_guesser(self) -> Guesser:
        return make_guesser(self.guesser, self.k_sims)


@dataclass
class GameStats:
    trials: int
    mean: float
    std: float
    ci95: float
    std_defined: bool
    hit_rates: np.ndarray
    max_ops_per_draw: int
    memory_bits: int
    mean_uniform_retries: float
    seconds: float = 0.0
    scores: np.ndarray = None


def trial_seed(master: int, i: int) -> int:
    return mix(master, i)


def play_game(dealer: Dealer, guesser: Guesser, seed: int) -> Transcript:
    """One full game; dealer randomness is mix(seed, 0), guesser's mix(seed, 1)."""
    n = dealer.n
    dealer.reset()
    guesser.reset(n)
    dsrc, gsrc = RandomSource(mix(seed, 0)), RandomSource(mix(seed, 1))
    tr = Transcript(n, seed)
    seen = set()
    for _ in range(n):
        g = guesser.guess(dealer, tr.pairs, gsrc)
        c = dealer.draw(dsrc)
        if c in seen or not 1 <= c <= n:
            raise AuditError(f"dealer repeated or invented card {c}")
        seen.add(c)
        guesser.observe(c)
        tr.guesses.append(g)
        tr.draws.append(c)
    return tr


@njit(cache=True, _nrt=False)
def play_games_k(buf, L, gbuf, G, dseeds, gseeds, gkind, k_sims,
                 drs, grs, seen, scores, hits, stats):
    """Batch of games against the dealer described by layout ``L``.

    Returns 0, or -t when turn t produced a repeated or invalid card.
    """
    n = G.n
    maxops = 0
    calls = 0
    rejects = 0
    for g in range(dseeds.shape[0]):
        dealer_reset(buf, L)
        seed_state_k(drs, dseeds[g])
        seed_state_k(grs, gseeds[g])
        g_reset_k(gbuf, G)
        seen[:] = False
        score = 0
        for t in range(1, n + 1):
            if gkind == REMEMBER:
                guess = remember_guess_k(gbuf, G, grs)
            else:
                k = k_sims if k_sims > 0 else min(1000, 16 * (n - t + 1))
                guess = sim_guess_k(buf, L, gbuf, G, grs, k)
            o0 = dealer_ops(buf, L)
            ch = dealer_choose(buf, L, drs)
            c = dealer_card(buf, L, ch)
            dealer_commit(buf, L, ch)
            used = dealer_ops(buf, L) - o0
            if used > maxops:
                maxops = used
            if c < 1 or c > n or seen[c]:
                return -t
            seen[c] = True
            g_observe_k(gbuf, G, c)
            if guess == c:
                score += 1
                hits[t] += 1
        scores[g] = score
        calls += drs[RS_CALLS]
        rejects += drs[RS_REJECTS]
    stats[0] = maxops
    stats[1] = calls
    stats[2] = rejects
    return 0


@njit(cache=True, _nrt=False)
def deal_many_k(buf, L, dseeds, drs, out):
    """Deal one full game per seed into the rows of ``out``."""
    for g in range(dseeds.shape[0]):
        dealer_reset(buf, L)
        seed_state_k(drs, dseeds[g])
        for t in range(out.shape[1]):
            ch = dealer_choose(buf, L, drs)
            out[g, t] = dealer_card(buf, L, ch)
            dealer_commit(buf, L, ch)


def deal_permutations(dealer: Dealer, master: int, games: int) -> np.ndarray:
    """(games, n) array of dealt orders; game i uses the dealer stream of trial_seed(master, i)."""
    dseeds = np.array([mix(trial_seed(master, i), 0) for i in range(games)], dtype=np.uint64)
    out = np.zeros((games, dealer.n), dtype=np.int64)
    deal_many_k(dealer.buf, dealer.layout, dseeds, np.zeros(7, dtype=np.uint64), out)
    dealer.reset()
    return out


def peak_memory(dealer: Dealer, seed: int = 0) -> int:
    """Largest memory account over one game; only some dealers' accounts move."""
    if hasattr(dealer, "peak_memory_bits"):
        return dealer.peak_memory_bits(RandomSource(mix(seed, 0)))
    dealer.reset()
    return dealer.memory_bits


def _summarise(scores, hits, trials, maxops, calls, rejects, memory_bits, seconds):
    mean = float(scores.mean())
    if trials > 1:
        std = float(scores.std(ddof=1))
        ci = 1.96 * std / math.sqrt(trials)
    else:
        std, ci = 0.0, float("nan")
    return GameStats(
        trials=trials, mean=mean, std=std, ci95=ci, std_defined=trials > 1,
        hit_rates=hits[1:] / trials, max_ops_per_draw=int(maxops), memory_bits=int(memory_bits),
        mean_uniform_retries=rejects / calls if calls else 0.0, seconds=seconds, scores=scores,
    )


def run_trials(config: GameConfig) -> GameStats:
    """Play ``config.trials`` independent games with seeds mix(seed, i)."""
    config.validate()
    start = time.perf_counter()
    dealer = config.make_dealer()
    n, trials = config.n, config.trials
    seeds = [trial_seed(config.seed, i) for i in range(trials)]
    scores = np.zeros(trials, dtype=np.int64)
    hits = np.zeros(n + 1, dtype=np.int64)
    if config.guesser == "myopic-exact":
        maxops, calls, rejects = _python_trials(dealer, config.make_guesser(), seeds, scores, hits)
    else:
        dseeds = np.array([mix(s, 0) for s in seeds], dtype=np.uint64)
        gseeds = np.array([mix(s, 1) for s in seeds], dtype=np.uint64)
        stats = np.zeros(3, dtype=np.int64)
        gbuf, G = guesser_state(n)
        code = play_games_k(dealer.buf, dealer.layout, gbuf, G, dseeds, gseeds,
                            REMEMBER if config.guesser == "remember" else SIM, config.k_sims or 0,
                            np.zeros(7, dtype=np.uint64), np.zeros(7, dtype=np.uint64),
                            np.zeros(n + 1, dtype=np.bool_), scores, hits, stats)
        if code < 0:
            raise AuditError(f"dealer repeated a card at turn {-code}")
        maxops, calls, rejects = (int(v) for v in stats)
    memory_bits = peak_memory(config.make_dealer(), seeds[0])
    return _summarise(scores, hits, trials, maxops, calls, rejects, memory_bits,
                      time.perf_counter() - start)


def _python_trials(dealer, guesser, seeds, scores, hits):
    maxops = calls = rejects = 0
    for i, seed in enumerate(seeds):
        tr = play_game(dealer, guesser, seed)
        scores[i] = tr.score
        for t, (g, c) in enumerate(tr.pairs, 1):
            hits[t] += g == c
    # op and retry counts come from a replay with the dealer's own stream
    for seed in seeds[:1]:
        dealer.reset()
        src = RandomSource(mix(seed, 0))
        for _ in range(dealer.n):
            o0 = dealer.ops
            dealer.draw(src)
            maxops = max(maxops, dealer.ops - o0)
        calls, rejects = src.uniform_calls, src.uniform_rejections
    return maxops, calls, rejects
