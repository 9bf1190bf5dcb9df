"""Encode a dealer's run as periodic state snapshots plus per-block orderings.

Every L turns the dealer's fixed-width state is recorded. The cards drawn in
block i are the cards available at the start of the block but not at its end,
so the snapshots pin down each block's card set; a Lehmer-coded permutation
then says in which order those cards came out. Decoding inverts both steps.
"""
import math
from dataclasses import dataclass, field

from .dealers import make_dealer
from .dealers.base import Dealer, NotOpenBookError
from .wordops import RandomSource, mix

DIFF_KINDS = ("bitmap", "adaptive")
SEARCH_LIMIT = 12


class CorruptEncodingError(ValueError):
    """Snapshots that no run of the dealer could have produced."""


# permutation codes --------------------------------------------------------

def lehmer_width(L: int) -> int:
    """ceil(log2 L!), the fixed width of a permutation code."""
    return (math.factorial(L) - 1).bit_length()


def lehmer_encode(perm) -> int:
    """Rank of a permutation of 1..L in the factorial number system (identity -> 0)."""
    perm = list(perm)
    L = len(perm)
    if sorted(perm) != list(range(1, L + 1)):
        raise ValueError("not a permutation of 1..L")
    code = 0
    rest = list(range(1, L + 1))
    for i, v in enumerate(perm):
        j = rest.index(v)
        code += j * math.factorial(L - 1 - i)
        rest.pop(j)
    return code


def lehmer_decode(code: int, L: int) -> list:
    if not 0 <= code < math.factorial(L):
        raise ValueError(f"code {code} outside [0, {L}!)")
    rest = list(range(1, L + 1))
    out = []
    for i in range(L):
        f = math.factorial(L - 1 - i)
        j, code = divmod(code, f)
        out.append(rest.pop(j))
    return out


# run encoding --------------------------------------------------------------

@dataclass
class RunEncoding:
    block: int
    n: int
    state_bits: int
    snapshots: list = field(default_factory=list)
    permutations: list = field(default_factory=list)

    @property
    def blocks(self) -> int:
        return self.n // self.block

    @property
    def perm_bits(self) -> int:
        return lehmer_width(self.block)

    @property
    def total_bits(self) -> int:
        return self.blocks * (self.state_bits + self.perm_bits)

    def to_int(self) -> int:
        """All snapshots and codes packed into one integer of ``total_bits`` bits."""
        v, at = 0, 0
        for snap, code in zip(self.snapshots, self.permutations):
            v |= snap << at
            at += self.state_bits
            v |= code << at
            at += self.perm_bits
        return v

    @classmethod
    def from_int(cls, value: int, block: int, n: int, state_bits: int) -> "RunEncoding":
        enc = cls(block, n, state_bits)
        sm, pm = (1 << state_bits) - 1, (1 << enc.perm_bits) - 1
        for _ in range(n // block):
            enc.snapshots.append(value & sm)
            value >>= state_bits
            enc.permutations.append(value & pm)
            value >>= enc.perm_bits
        if value:
            raise CorruptEncodingError("bits beyond the encoding's length")
        return enc


def _check_block(n: int, L: int):
    if L < 1 or n % L:
        raise ValueError(f"block length {L} must divide n = {n}")


def block_permutation(cards) -> list:
    """pi with pi(j) = position (1-based) in the block of its j-th smallest card."""
    order = sorted(range(len(cards)), key=lambda i: cards[i])
    return [i + 1 for i in order]


def _record(dealer: Dealer, step, L: int) -> tuple:
    """Run ``step()`` for every turn, snapshotting after each block."""
    n = dealer.n
    _check_block(n, L)
    enc = RunEncoding(L, n, dealer.state_bits)
    draws = []
    for _ in range(n // L):
        block = [step() for _ in range(L)]
        draws.extend(block)
        enc.snapshots.append(dealer.snapshot())
        enc.permutations.append(lehmer_encode(block_permutation(block)))
    return enc, draws


def encode_run(dealer_kind: str, params: dict, seed: int, L: int) -> RunEncoding:
    """Deal one game (dealer stream mix(seed, 0)) and encode it with block length L."""
    dealer = make_dealer(dealer_kind, **params)
    _check_block(dealer.n, L)
    if not dealer.open_book:
        raise NotOpenBookError(f"{dealer_kind} dealer has no observable state to snapshot")
    dealer.reset()
    src = RandomSource(mix(seed, 0))
    enc, _ = _record(dealer, lambda: dealer.draw(src), L)
    return enc


def encode_choices(dealer: Dealer, choices, L: int) -> tuple:
    """Encode the run that makes the given choices; returns (encoding, draws)."""
    dealer.reset()
    it = iter(choices)

    def step():
        ch = next(it)
        c = dealer.card(ch)
        dealer.commit(ch)
        return c

    return _record(dealer, step, L)


# decoding ------------------------------------------------------------------

def _available(dealer: Dealer, snapshot: int, turn: int) -> set:
    try:
        return set(dealer.restore(snapshot, turn).available())
    except CorruptEncodingError:
        raise
    except Exception as exc:  # any failure to interpret the state
        raise CorruptEncodingError(f"snapshot at turn {turn} does not decode: {exc}") from exc


def _range_by_diff(dealer, before, after, t0, L):
    prev = _available(dealer, before, t0) if before is not None else set(range(1, dealer.n + 1))
    nxt = _available(dealer, after, t0 + L)
    if not nxt <= prev:
        raise CorruptEncodingError(f"cards reappear between turns {t0} and {t0 + L}")
    drawn = prev - nxt
    if len(drawn) != L:
        raise CorruptEncodingError(f"block after turn {t0} has {len(drawn)} cards, expected {L}")
    return drawn


def _range_by_search(dealer, before, after, t0, L):
    """All card sets reachable in L turns from ``before`` whose end state is ``after``."""
    start = dealer.restore(before, t0) if before is not None else dealer.clone().reset()
    found = set()

    def walk(d, depth, cards):
        if depth == L:
            if d.snapshot() == after:
                found.add(frozenset(cards))
            return
        for ch in d.choice_support():
            nxt = d.clone()
            c = nxt.card(ch)
            nxt.commit(ch)
            walk(nxt, depth + 1, cards + [c])

    walk(start, 0, [])
    if len(found) != 1:
        raise CorruptEncodingError(f"{len(found)} card sets lead to the snapshot at turn {t0 + L}")
    return set(next(iter(found)))


def decode_run(enc: RunEncoding, dealer_kind: str, params: dict, method: str = "auto") -> list:
    """Recover the draw sequence d_1..d_n from an encoding.

    ``method`` picks range recovery: "diff" (available-set differences, bitmap
    and adaptive dealers), "search" (exhaustive, n <= 12) or "auto".
    """
    dealer = make_dealer(dealer_kind, **params)
    n, L = dealer.n, enc.block
    _check_block(n, L)
    if enc.n != n or enc.state_bits != dealer.state_bits:
        raise CorruptEncodingError("encoding does not match the dealer parameters")
    if len(enc.snapshots) != n // L or len(enc.permutations) != n // L:
        raise CorruptEncodingError("wrong number of blocks")
    if method == "auto":
        method = "diff" if dealer_kind in DIFF_KINDS else "search"
    if method == "search" and n > SEARCH_LIMIT:
        raise ValueError(f"exhaustive range search is limited to n <= {SEARCH_LIMIT}")
    recover = _range_by_diff if method == "diff" else _range_by_search
    dealer.reset()
    draws = []
    before = None
    for i, (snap, code) in enumerate(zip(enc.snapshots, enc.permutations)):
        cards = sorted(recover(dealer, before, snap, i * L, L))
        try:
            perm = lehmer_decode(code, L)
        except ValueError as exc:
            raise CorruptEncodingError(str(exc)) from exc
        block = [0] * L
        for j, pos in enumerate(perm):
            block[pos - 1] = cards[j]
        draws.extend(block)
        before = snap
    if sorted(draws) != list(range(1, n + 1)):
        raise CorruptEncodingError("decoded draws are not a permutation")
    return draws
