"""Card dealers: each deals a permutation of [1..n], one card per turn."""
from .adaptive import AdaptiveDealer, adaptive_draw, adaptive_final_draw, potential
from .balanced import BalancedBits, balanced_bit, sample_strings, string_probability
from .base import AuditError, Dealer, NotOpenBookError
from .prp import PRPDealer, prp_draw
from .simple import BitmapDealer, FisherYatesDealer, PerfectDealer

DEALERS = {
    "bitmap": BitmapDealer,
    "fy": FisherYatesDealer,
    "perfect": PerfectDealer,
    "adaptive": AdaptiveDealer,
    "prp": PRPDealer,
}


def make_dealer(kind: str, n: int, d: int | None = None, rounds: int | None = None,
                key: int = 0, rejection: bool = False) -> Dealer:
    if kind not in DEALERS:
        raise ValueError(f"unknown dealer {kind!r}")
    if kind == "adaptive":
        if d is None:
            raise ValueError("the adaptive dealer needs d")
        return AdaptiveDealer(n, d, rejection=rejection)
    if kind == "prp":
        return PRPDealer(n, key, rounds=rounds)
    return DEALERS[kind](n)


def bitmap_draw(dealer: BitmapDealer, src) -> int:
    return dealer.draw(src)


def fy_draw(dealer: FisherYatesDealer, src) -> int:
    return dealer.draw(src)


def perfect_draw(dealer: PerfectDealer, src) -> int:
    return dealer.draw(src)


__all__ = [
    "AdaptiveDealer", "AuditError", "BalancedBits", "BitmapDealer", "DEALERS", "Dealer",
    "FisherYatesDealer", "NotOpenBookError", "PRPDealer", "PerfectDealer", "adaptive_draw",
    "adaptive_final_draw", "balanced_bit", "bitmap_draw", "fy_draw", "make_dealer", "perfect_draw",
    "potential", "prp_draw", "sample_strings", "string_probability",
]
