"""Adaptive-threshold dealer over d mini-decks, with a compact final phase.

Mini-deck i holds cards (i-1)s+1 .. is (s = n/d) and always deals its lowest
undrawn card. Stage tau covers turns (tau-1)d+1 .. tau*d; a mini-deck may be
drawn while its load is below the threshold tau+1. Its hole count is
threshold - load, kept in a CounterArray, and the drawable mini-decks sit in
a subset sampler. The sampler for the next stage is filled one mini-deck per
turn: at turn j of a stage, mini-deck j gets its extra hole.

Once only 2d cards remain, draws become uniform over the remaining cards.
Those cards are tracked in slots of g = ceil(log2 d) bits, one sampler cell
per slot block, so the same population pipeline picks a slot. Slots are
handed out card by card in the turns before the switch; a slot is decoded
back to its card through the block metadata (first-card bitmap, first deck,
first offset) and the leaders bitmap.
"""
import math
from collections import namedtuple
from fractions import Fraction

import numpy as np
from numba import njit

from ..arena import hot, kernel
from ..memory import MemoryAccount, bits_for
from ..subset_sampler import (OPS, SIZE, ss_add_k, ss_clear_k, ss_codec_fields, ss_contains_k, ss_distribution,
                              ss_init, ss_layout, ss_memory, ss_ops_k, ss_rebuild_k, ss_remove_k, ss_sample_k)
from ..varcounters import ca_codec_fields, ca_fill_k, ca_get_k, ca_layout, ca_memory, ca_rebuild_k, ca_set_k
from ..wordops import (highest_bit_k, low_mask_k, popcount_k, rank1_k, select1_k, uniform_k)
from .base import AuditError, Dealer

EPSILON = 1 / 200

AdaptiveLayout = namedtuple(
    "AdaptiveLayout",
    "holes samp0 samp1 fin frozen fbits fdeck foff leaders lrank lptr meta n d s g t0 W ncf reject")

# meta segment: turn, ops, then the construction registers
(M_TURN, M_OPS, M_CDECK, M_CPOS, M_CR, M_CL0, M_CSTART, M_NEXT, M_DONE, M_NLEAD,
 M_LASTFULL, M_LRANKED) = range(12)

_U1 = np.uint64(1)


# live counters -----------------------------------------------------------

@hot
def holes_before_k(buf, L, i, t):
    """Holes of deck i as seen by turn t, before that turn's draw."""
    tau = (t - 1) // L.d + 1
    j = t - (tau - 1) * L.d
    y = ca_get_k(buf, L.holes, i)
    # decks before j already got their replenishment for stage tau+1
    return y - 1 if i < j else y


@hot
def load_before_k(buf, L, i, t):
    return (t - 1) // L.d + 2 - holes_before_k(buf, L, i, t)


@hot
def _current_sampler(L, t):
    if ((t - 1) // L.d + 1) % 2 == 1:
        return L.samp1
    return L.samp0


@hot
def _next_sampler(L, t):
    if ((t - 1) // L.d + 1) % 2 == 1:
        return L.samp0
    return L.samp1


# final-phase slots -------------------------------------------------------

@hot
def slot_card_k(buf, L, e):
    """Card tracked by slot e (1-based)."""
    slot = e - 1
    blk = slot // L.g
    bit = slot % L.g + 1
    fb = np.uint64(buf[L.fbits + blk])
    r = rank1_k(fb, bit)
    if r == 0:
        deck = buf[L.fdeck + blk]
        k = buf[L.foff + blk] + bit - 1
    else:
        deck = buf[L.fdeck + blk] + r - np.int64(fb & _U1)
        k = bit - select1_k(fb, r)
    return deck * L.s - ca_get_k(buf, L.frozen, deck) + k


@kernel
def deck_start_slot_k(buf, L, i):
    """0-based slot of the first tracked card of a fully added deck i."""
    w = (i - 1) >> 6
    b = (i - 1) & 63
    x = np.uint64(buf[L.leaders + w]) & low_mask_k(b + 1)
    if x == 0:
        w -= 1
        x = np.uint64(buf[L.leaders + w])
    lb = highest_bit_k(x)
    lead = w * 64 + lb
    rank = buf[L.lrank + w] + popcount_k(np.uint64(buf[L.leaders + w]) & low_mask_k(lb - 1))
    blk = buf[L.lptr + rank]
    sb = select1_k(np.uint64(buf[L.fbits + blk]), i - lead + 1)
    return blk * L.g + sb - 1


# worst-case steps of one construction unit: deck setup, leader entry, slot
UNIT_COST = 9


@kernel
def _track_draw(buf, L, i, load):
    # a deck already handed slots mirrors its draws in the final cells
    m = L.meta
    buf[m + M_OPS] += 3
    if i < buf[m + M_CDECK]:
        k = load - ((L.s - 1) - ca_get_k(buf, L.frozen, i))
        ss_remove_k(buf, L.fin, deck_start_slot_k(buf, L, i) + k + 1)
    elif i == buf[m + M_CDECK] and buf[m + M_CPOS] > 0:
        k = load - buf[m + M_CL0]
        if k < buf[m + M_CPOS]:
            ss_remove_k(buf, L.fin, buf[m + M_CSTART] + k + 1)


@kernel
def _construct_unit(buf, L, tn):
    """Hand out one slot; ``tn`` is the next turn (for the live loads)."""
    m = L.meta
    if buf[m + M_DONE]:
        return
    s, g = L.s, L.g
    deck = buf[m + M_CDECK]
    pos = buf[m + M_CPOS]
    if pos == 0:
        l0 = load_before_k(buf, L, deck, tn)
        buf[m + M_CL0] = l0
        buf[m + M_CR] = s - l0
        buf[m + M_CSTART] = buf[m + M_NEXT]
        ca_set_k(buf, L.frozen, deck, (s - 1) - l0)
        blk = buf[m + M_NEXT] // g
        if buf[L.fbits + blk] == 0:
            # first deck to begin in this block: a leader
            w = (deck - 1) >> 6
            q = L.leaders + w
            buf[q] = np.int64(np.uint64(buf[q]) | (_U1 << np.uint64((deck - 1) & 63)))
            while buf[m + M_LRANKED] < w:
                buf[m + M_LRANKED] += 1
                buf[L.lrank + buf[m + M_LRANKED]] = buf[m + M_NLEAD]
            buf[L.lptr + buf[m + M_NLEAD]] = blk
            buf[m + M_NLEAD] += 1
        q = L.fbits + blk
        buf[q] = np.int64(np.uint64(buf[q]) | (_U1 << np.uint64(buf[m + M_NEXT] % g)))
    slot = buf[m + M_NEXT]
    blk = slot // g
    if slot % g == 0:
        buf[L.fdeck + blk] = deck
        buf[L.foff + blk] = pos
    if pos >= load_before_k(buf, L, deck, tn) - buf[m + M_CL0]:
        ss_add_k(buf, L.fin, slot + 1)
    buf[m + M_NEXT] += 1
    pos += 1
    buf[m + M_OPS] += UNIT_COST
    if pos == buf[m + M_CR]:
        buf[m + M_LASTFULL] = deck
        buf[m + M_CDECK] += 1
        pos = 0
        if buf[m + M_CDECK] > L.d:
            buf[m + M_DONE] = 1
    buf[m + M_CPOS] = pos


@njit(cache=True)
def _finish_construction(buf, L, tn):
    while not buf[L.meta + M_DONE]:
        _construct_unit(buf, L, tn)


# protocol ----------------------------------------------------------------

@kernel
def adaptive_reset_k(buf, L):
    d = L.d
    ca_fill_k(buf, L.holes, 2)
    ss_clear_k(buf, L.samp0)
    ss_clear_k(buf, L.samp1)
    for i in range(1, d + 1):
        ss_add_k(buf, L.samp1, i)
    ss_clear_k(buf, L.fin)
    buf[L.samp0.meta + OPS] = 0
    buf[L.samp1.meta + OPS] = 0
    buf[L.fin.meta + OPS] = 0
    buf[L.fbits:L.fbits + L.ncf] = 0
    buf[L.fdeck:L.fdeck + L.ncf] = 0
    buf[L.foff:L.foff + L.ncf] = 0
    ca_fill_k(buf, L.frozen, 0)
    words = (d + 63) // 64
    buf[L.leaders:L.leaders + words] = 0
    buf[L.lrank:L.lrank + words] = 0
    buf[L.lptr:L.lptr + L.ncf] = 0
    buf[L.meta:L.meta + 12] = 0
    buf[L.meta + M_CDECK] = 1
    if L.n == 2 * d:
        _finish_construction(buf, L, 1)


@hot
def _choose(buf, L, rs):
    t = buf[L.meta + M_TURN] + 1
    if t <= L.n - 2 * L.d:
        if L.reject:
            while True:
                i = uniform_k(rs, L.d)
                buf[L.meta + M_OPS] += 2
                if holes_before_k(buf, L, i, t) >= 1:
                    return i
        smp = _current_sampler(L, t)
        if buf[smp.meta + SIZE] == 0:
            raise RuntimeError("no drawable mini-deck")
        return ss_sample_k(buf, smp, rs)
    return ss_sample_k(buf, L.fin, rs)


@hot
def _card(buf, L, choice):
    t = buf[L.meta + M_TURN] + 1
    if t <= L.n - 2 * L.d:
        return (choice - 1) * L.s + load_before_k(buf, L, choice, t) + 1
    return slot_card_k(buf, L, choice)


@kernel
def adaptive_choose_k(buf, L, rs):
    return _choose(buf, L, rs)


@kernel
def adaptive_card_k(buf, L, choice):
    return _card(buf, L, choice)


@kernel
def adaptive_preview_k(buf, L, rs):
    """Card the next turn would deal with ``rs``, without committing it."""
    return _card(buf, L, _choose(buf, L, rs))


@kernel
def adaptive_commit_k(buf, L, choice):
    n, d, m = L.n, L.d, L.meta
    t = buf[m + M_TURN] + 1
    if t <= n - 2 * d:
        i = choice
        tau = (t - 1) // d + 1
        j = t - (tau - 1) * d
        cur = holes_before_k(buf, L, i, t)
        if cur < 1:
            raise ValueError("mini-deck is not drawable")
        load = tau + 1 - cur
        ca_set_k(buf, L.holes, i, ca_get_k(buf, L.holes, i) - 1)
        buf[m + M_OPS] += 3
        if cur == 1 and not L.reject:
            ss_remove_k(buf, _current_sampler(L, t), i)
        _track_draw(buf, L, i, load)
        # replenish deck j for the next stage
        ca_set_k(buf, L.holes, j, ca_get_k(buf, L.holes, j) + 1)
        if not L.reject:
            nxt = _next_sampler(L, t)
            if not ss_contains_k(buf, nxt, j):
                ss_add_k(buf, nxt, j)
        buf[m + M_OPS] += 3
        buf[m + M_TURN] = t
        if t >= L.t0:
            for _ in range(4):
                _construct_unit(buf, L, t + 1)
        if t == n - 2 * d:
            _finish_construction(buf, L, t + 1)
    else:
        ss_remove_k(buf, L.fin, choice)
        buf[m + M_TURN] = t


@kernel
def adaptive_ops_k(buf, L):
    return (buf[L.meta + M_OPS] + ss_ops_k(buf, L.samp0) + ss_ops_k(buf, L.samp1)
            + ss_ops_k(buf, L.fin))


@njit(cache=True)
def holes_after_k(buf, L):
    """(sum of holes, max load - threshold) right after the last turn."""
    d = L.d
    t = buf[L.meta + M_TURN]
    tau = (t - 1) // d + 1
    j = t - (tau - 1) * d
    total = 0
    worst = -(1 << 62)
    for i in range(1, d + 1):
        y = ca_get_k(buf, L.holes, i)
        x = y - 1 if i <= j else y
        total += x
        if -x > worst:
            worst = -x
    return total, worst


@njit(cache=True)
def adaptive_rebuild_k(buf, L):
    ca_rebuild_k(buf, L.holes)
    ca_rebuild_k(buf, L.frozen)
    ss_rebuild_k(buf, L.samp0)
    ss_rebuild_k(buf, L.samp1)
    ss_rebuild_k(buf, L.fin)


@kernel
def _overflow_bits(buf, L, index_bits):
    # the only part of the memory account that changes during a game
    return ((buf[L.holes.meta] + buf[L.frozen.meta]) * index_bits
            + buf[L.holes.meta + 1] + buf[L.frozen.meta + 1])


@kernel
def peak_overflow_k(buf, L, rs, index_bits):
    adaptive_reset_k(buf, L)
    best = _overflow_bits(buf, L, index_bits)
    for _ in range(L.n):
        adaptive_commit_k(buf, L, adaptive_choose_k(buf, L, rs))
        best = max(best, _overflow_bits(buf, L, index_bits))
    return best


@njit(cache=True)
def invariant_scan_k(buf, L, rs, out):
    """Deal one game, checking holes before every adaptive-phase turn.

    out <- [violations, min hole total, max hole total, min single hole].
    """
    adaptive_reset_k(buf, L)
    bad = 0
    lo = 1 << 62
    hi = -lo
    low_hole = lo
    for t in range(1, L.n - 2 * L.d + 1):
        total = 0
        least = 1 << 62
        for i in range(1, L.d + 1):
            x = holes_before_k(buf, L, i, t)
            total += x
            least = min(least, x)
        if total < L.d or total > 2 * L.d or least < 0:
            bad += 1
        lo = min(lo, total)
        hi = max(hi, total)
        low_hole = min(low_hole, least)
        adaptive_commit_k(buf, L, adaptive_choose_k(buf, L, rs))
    out[0] = bad
    out[1] = lo
    out[2] = hi
    out[3] = low_hole


# Python surface -----------------------------------------------------------

def final_geometry(d: int) -> tuple:
    """(slot width g, construction window W, slot blocks) for d mini-decks."""
    g = max(1, math.ceil(math.log2(d))) if d > 1 else 1
    window = -(-2 * d // 3)
    ncf = -(-(2 * d + window) // g)
    return g, window, ncf


class AdaptiveDealer(Dealer):
    """Threshold dealer over d mini-decks; uniform over the last 2d cards."""

    kind = "adaptive"
    layout_type = AdaptiveLayout
    reset_k, choose_k, card_k, commit_k = adaptive_reset_k, adaptive_choose_k, adaptive_card_k, adaptive_commit_k
    preview_k = adaptive_preview_k
    ops_k = adaptive_ops_k

    def __init__(self, n: int, d: int, rejection: bool = False):
        super().__init__(n)
        if d < 1 or n % d or n < 2 * d:
            raise ValueError("need d >= 1 dividing n with n >= 2d")
        self.d = d
        self.deck_size = n // d
        self.rejection = rejection
        g, window, ncf = final_geometry(d)
        self.slot_width, self.window, self.blocks = g, window, ncf
        t0 = max(1, n - 2 * d - window + 1)
        a = self.arena
        words = (d + 63) // 64
        self.layout = AdaptiveLayout(
            holes=ca_layout(a, "holes", d),
            samp0=ss_layout(a, "samp0", d),
            samp1=ss_layout(a, "samp1", d),
            fin=ss_layout(a, "fin", ncf * g, cellwidth=g),
            frozen=ca_layout(a, "frozen", d),
            fbits=a.alloc("fbits", ncf),
            fdeck=a.alloc("fdeck", ncf),
            foff=a.alloc("foff", ncf),
            leaders=a.alloc("leaders", words),
            lrank=a.alloc("lrank", words),
            lptr=a.alloc("lptr", ncf),
            meta=a.alloc("meta", 12),
            n=n, d=d, s=n // d, g=g, t0=t0, W=window, ncf=ncf, reject=int(rejection),
        )
        self.buf = a.new_buffer()
        for smp in (self.layout.samp0, self.layout.samp1, self.layout.fin):
            ss_init(self.buf, smp)
        self.reset()

    @property
    def in_final_phase(self) -> bool:
        return self.turn >= self.n - 2 * self.d

    @property
    def construction_done(self) -> bool:
        return bool(self.buf[self.layout.meta + M_DONE])

    def stage(self, t: int | None = None) -> int:
        t = self.turn + 1 if t is None else t
        return (t - 1) // self.d + 1

    def threshold(self, t: int | None = None) -> int:
        return self.stage(t) + 1

    def holes(self) -> list:
        """Hole counts seen by the next turn (adaptive phase only)."""
        t = self.turn + 1
        return [int(holes_before_k(self.buf, self.layout, i, t)) for i in range(1, self.d + 1)]

    def loads(self) -> list:
        t = self.turn + 1
        return [int(load_before_k(self.buf, self.layout, i, t)) for i in range(1, self.d + 1)]

    def drawable(self) -> list:
        return [i for i, x in enumerate(self.holes(), 1) if x >= 1]

    def potential(self) -> float:
        if self.in_final_phase and self.turn > self.n - 2 * self.d:
            raise AuditError("potential is defined in the adaptive phase only")
        return sum((1 + EPSILON) ** x for x in self.holes())

    def top_card(self, i: int) -> int:
        return (i - 1) * self.deck_size + self.loads()[i - 1] + 1

    def _tracked_slots(self) -> list:
        fin = self.layout.fin
        return [e for e in range(1, fin.n + 1) if ss_contains_k(self.buf, fin, e)]

    def available(self) -> set:
        if self.turn <= self.n - 2 * self.d:
            s = self.deck_size
            out = set()
            for i, load in enumerate(self.loads(), 1):
                out.update(range((i - 1) * s + load + 1, i * s + 1))
            return out
        return self.tracked_cards()

    def tracked_cards(self) -> set:
        return {int(slot_card_k(self.buf, self.layout, e)) for e in self._tracked_slots()}

    def choice_support(self) -> list:
        if self.turn < self.n - 2 * self.d:
            return self.drawable()
        return self._tracked_slots()

    def next_distribution(self, cap=1 << 20):
        L = self.layout
        t = self.turn + 1
        if t <= self.n - 2 * self.d:
            if self.rejection:
                decks = self.drawable()
                law = {i: Fraction(1, len(decks)) for i in decks}
                branches = self.d
            else:
                law, branches = ss_distribution(self.buf, _current_sampler(L, t), cap)
        else:
            law, branches = ss_distribution(self.buf, L.fin, cap)
        return {self.card(c): p for c, p in law.items()}, branches

    def invariant_scan(self, src) -> dict:
        """Play a game from ``src`` checking the holes invariant at every adaptive turn."""
        out = np.zeros(4, dtype=np.int64)
        invariant_scan_k(self.buf, self.layout, src.state, out)
        self.reset()
        return dict(zip(("violations", "min_total", "max_total", "min_hole"), (int(v) for v in out)))

    def audit(self):
        """Check the phase invariants; raises AuditError on a breach."""
        t = self.turn + 1
        if t <= self.n - 2 * self.d:
            holes = self.holes()
            total = sum(holes)
            if not self.d <= total <= 2 * self.d:
                raise AuditError(f"hole total {total} outside [d, 2d]")
            if min(holes) < 0:
                raise AuditError("a load exceeds the threshold")
            if not self.rejection:
                cur = _current_sampler(self.layout, t)
                for i, x in enumerate(holes, 1):
                    if bool(ss_contains_k(self.buf, cur, i)) != (x >= 1):
                        raise AuditError(f"sampler membership of deck {i} disagrees with its holes")
        if self.construction_done:
            remaining = self.n - self.turn
            if len(self._tracked_slots()) != remaining:
                raise AuditError("tracked cards differ from the cards remaining")
            if self.tracked_cards() != self.available():
                raise AuditError("tracked cards are not the undrawn cards")
        return True

    def memory(self) -> MemoryAccount:
        L = self.layout
        d, g, ncf = self.d, self.slot_width, self.blocks
        slots = ncf * g
        acct = MemoryAccount()
        acct.merge("hole_counters", ca_memory(self.buf, L.holes))
        acct.merge("current_sampler", ss_memory(L.samp0))
        acct.merge("next_sampler", ss_memory(L.samp1))
        acct.merge("final_slots", ss_memory(L.fin))
        acct.add("final_first_bits", ncf * g)
        acct.add("final_first_deck", ncf * bits_for(d + 1))
        acct.add("final_first_offset", ncf * bits_for(slots + 1))
        acct.merge("frozen_counters", ca_memory(self.buf, L.frozen))
        acct.add("leaders", d)
        acct.add("leader_rank", (d + 63) // 64 * bits_for(ncf + 1))
        acct.add("leader_pointer", ncf * bits_for(ncf))
        acct.add("construction_registers",
                 2 * bits_for(d + 2) + 4 * bits_for(slots + 1) + bits_for(self.deck_size + 1) + 1)
        return acct

    def peak_memory_bits(self, src) -> int:
        """Largest ``memory_bits`` over one game dealt from ``src``; leaves the dealer reset."""
        self.reset()
        base = self.memory_bits - _overflow_bits(self.buf, self.layout, bits_for(self.d))
        peak = peak_overflow_k(self.buf, self.layout, src.state, bits_for(self.d))
        self.reset()
        return base + int(peak)

    def codec_fields(self):
        L = self.layout
        d, ncf = self.d, self.blocks
        slots = ncf * self.slot_width
        fields = ca_codec_fields("holes", L.holes, 2 * d + 2)
        fields += ss_codec_fields("samp0", L.samp0) + ss_codec_fields("samp1", L.samp1)
        fields += ss_codec_fields("fin", L.fin)
        fields += [("fbits", self.slot_width), ("fdeck", bits_for(d + 1)), ("foff", bits_for(slots + 1))]
        fields += ca_codec_fields("frozen", L.frozen, self.deck_size)
        fields += [("leaders", 64), ("lrank", bits_for(ncf + 1)), ("lptr", bits_for(ncf + 1))]
        fields += [
            (f"meta#{M_CDECK}", bits_for(d + 2)),
            (f"meta#{M_CPOS}", bits_for(slots + 1)),
            (f"meta#{M_CR}", bits_for(self.deck_size + 1)),
            (f"meta#{M_CL0}", bits_for(self.deck_size + 1)),
            (f"meta#{M_CSTART}", bits_for(slots + 1)),
            (f"meta#{M_NEXT}", bits_for(slots + 1)),
            (f"meta#{M_DONE}", 1),
            (f"meta#{M_NLEAD}", bits_for(ncf + 1)),
            (f"meta#{M_LASTFULL}", bits_for(d + 1)),
            (f"meta#{M_LRANKED}", bits_for((d + 63) // 64 + 1)),
        ]
        return fields

    def rebuild(self):
        adaptive_rebuild_k(self.buf, self.layout)


def potential(dealer: AdaptiveDealer) -> float:
    return dealer.potential()


def adaptive_draw(dealer: AdaptiveDealer, src) -> int:
    if dealer.turn + 1 > dealer.n - 2 * dealer.d:
        raise AuditError("adaptive draw requested in the final phase")
    return dealer.draw(src)


def adaptive_final_draw(dealer: AdaptiveDealer, src) -> int:
    if dealer.turn + 1 <= dealer.n - 2 * dealer.d:
        raise AuditError("final draw requested in the adaptive phase")
    return dealer.draw(src)
