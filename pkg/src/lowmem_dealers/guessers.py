"""Guessers: remembering (uniform over undrawn), exact myopic and simulated myopic."""
import math
from collections import namedtuple

from numba import njit

from .arena import Arena, hot, kernel
from .dealers.base import AuditError, NotOpenBookError
from .dealers.protocol import dealer_preview
from .wordops import RandomSource, uniform_k

GuesserLayout = namedtuple("GuesserLayout", "avail pos counts touched meta n")
# meta segment: [live]

DEFAULT_CAP = 1 << 20


@kernel
def g_reset_k(gbuf, G):
    for c in range(1, G.n + 1):
        gbuf[G.avail + c - 1] = c
        gbuf[G.pos + c] = c - 1
    gbuf[G.counts:G.counts + G.n + 1] = 0
    gbuf[G.meta] = G.n


@hot
def g_observe_k(gbuf, G, card):
    # swap-remove the drawn card from the undrawn list
    live = gbuf[G.meta]
    i = gbuf[G.pos + card]
    if i < 0 or i >= live or gbuf[G.avail + i] != card:
        raise ValueError("card was already drawn")
    last = gbuf[G.avail + live - 1]
    gbuf[G.avail + i] = last
    gbuf[G.pos + last] = i
    gbuf[G.avail + live - 1] = card
    gbuf[G.pos + card] = -1
    gbuf[G.meta] = live - 1


@hot
def remember_guess_k(gbuf, G, rs):
    return gbuf[G.avail + uniform_k(rs, gbuf[G.meta]) - 1]


@hot
def tally_k(gbuf, G, c, ntouched):
    """Count one simulated card; returns the new number of distinct cards."""
    if gbuf[G.counts + c] == 0:
        gbuf[G.touched + ntouched] = c
        ntouched += 1
    gbuf[G.counts + c] += 1
    return ntouched


@kernel
def mode_k(gbuf, G, ntouched):
    """Most counted card, ties to the smallest; clears the tallies."""
    best, best_count = 0, -1
    for j in range(ntouched):
        c = gbuf[G.touched + j]
        cnt = gbuf[G.counts + c]
        if cnt > best_count or (cnt == best_count and c < best):
            best, best_count = c, cnt
        gbuf[G.counts + c] = 0
    return best


def guesser_layout(arena: Arena, n: int) -> GuesserLayout:
    return GuesserLayout(avail=arena.alloc("avail", n), pos=arena.alloc("pos", n + 1),
                         counts=arena.alloc("counts", n + 1), touched=arena.alloc("touched", n + 1),
                         meta=arena.alloc("meta", 1), n=n)


def guesser_state(n: int) -> tuple:
    """(buffer, layout) for the undrawn-card list and simulation tallies."""
    arena = Arena()
    G = guesser_layout(arena, n)
    gbuf = arena.new_buffer()
    g_reset_k(gbuf, G)
    return gbuf, G


@njit(cache=True, _nrt=False)
def sim_guess_k(buf, L, gbuf, G, rs, k):
    """Most frequent card over k one-turn simulations of the dealer's protocol."""
    ntouched = 0
    for _ in range(k):
        ntouched = tally_k(gbuf, G, dealer_preview(buf, L, rs), ntouched)
    return mode_k(gbuf, G, ntouched)


def default_sims(remaining: int) -> int:
    return min(1000, 16 * remaining)


class Guesser:
    kind = "base"
    needs_open_book = False

    def reset(self, n: int):
        self.gbuf, self.glayout = guesser_state(n)

    def observe(self, card: int):
        g_observe_k(self.gbuf, self.glayout, card)

    def undrawn(self) -> list:
        G = self.glayout
        return sorted(int(c) for c in self.gbuf[G.avail:G.avail + self.gbuf[G.meta]])

    def guess(self, dealer, history, src: RandomSource) -> int:
        raise NotImplementedError


class RememberingGuesser(Guesser):
    """Uniform over the cards not drawn yet."""

    kind = "remember"

    def guess(self, dealer, history, src):
        return int(remember_guess_k(self.gbuf, self.glayout, src.state))


class ExactMyopicGuesser(Guesser):
    """Argmax of the dealer's exact next-draw law, ties to the smaller card."""

    kind = "myopic-exact"
    needs_open_book = True

    def __init__(self, cap: int = DEFAULT_CAP):
        self.cap = cap
        self.last_probability = None
        self.last_entropy = None

    def guess(self, dealer, history, src=None):
        if not dealer.open_book:
            raise NotOpenBookError(f"{dealer.kind} dealer state is not observable")
        law, _ = dealer.next_distribution(self.cap)
        best = min(law, key=lambda c: (-law[c], c))
        self.last_probability = law[best]
        self.last_entropy = -sum(float(p) * math.log2(p) for p in law.values() if p > 0)
        # a most likely outcome always carries at least 2^-H of the mass
        if float(self.last_probability) < 2.0 ** -self.last_entropy - 1e-12:
            raise AuditError("heavy-element bound violated")
        return int(best)


class SimMyopicGuesser(Guesser):
    """Simulates the next turn k times from the dealer's public state."""

    kind = "myopic-sim"
    needs_open_book = True

    def __init__(self, k_sims: int | None = None):
        self.k_sims = k_sims

    def sims_for(self, remaining: int) -> int:
        return self.k_sims if self.k_sims else default_sims(remaining)

    def guess(self, dealer, history, src):
        if not dealer.open_book:
            raise NotOpenBookError(f"{dealer.kind} dealer state is not observable")
        k = self.sims_for(dealer.n - dealer.turn)
        return int(sim_guess_k(dealer.buf, dealer.layout, self.gbuf, self.glayout, src.state, k))


GUESSERS = {"remember": RememberingGuesser, "myopic-exact": ExactMyopicGuesser, "myopic-sim": SimMyopicGuesser}


def make_guesser(kind: str, k_sims: int | None = None) -> Guesser:
    if kind == "remember":
        return RememberingGuesser()
    if kind == "myopic-exact":
        return ExactMyopicGuesser()
    if kind == "myopic-sim":
        return SimMyopicGuesser(k_sims)
    raise ValueError(f"unknown guesser {kind!r}")


def _undrawn(n, history):
    drawn = {d for _, d in history} if history and isinstance(history[0], tuple) else set(history)
    return [c for c in range(1, n + 1) if c not in drawn]


def remembering_guess(n: int, history, src: RandomSource) -> int:
    """Uniform over cards absent from ``history`` (draws or (guess, draw) pairs)."""
    free = _undrawn(n, history)
    if not free:
        raise ValueError("no card left to guess")
    return free[int(uniform_k(src.state, len(free))) - 1]


def exact_myopic_guess(dealer, history=None, cap: int = DEFAULT_CAP) -> int:
    return ExactMyopicGuesser(cap).guess(dealer, history)


def sim_myopic_guess(dealer, history, k_sims: int, src: RandomSource) -> int:
    g = SimMyopicGuesser(k_sims)
    g.reset(dealer.n)
    return g.guess(dealer, history, src)
