"""Compile-time dispatch from a dealer's layout type to its kernels.

Generic compiled loops (the game engine, the simulating guesser) call
``dealer_choose(buf, L, rs)`` and friends; the layout's namedtuple class picks
the dealer class at typing time, so the call is static, inlined and cacheable.
"""
from numba.core.extending import overload

DEALER_BY_LAYOUT = {}


def register(layout_cls, dealer_cls):
    DEALER_BY_LAYOUT[layout_cls] = dealer_cls


def _kernel_for(L, name):
    cls = DEALER_BY_LAYOUT.get(getattr(L, "instance_class", None))
    if cls is None:
        return None
    return getattr(cls, name, None)


def dealer_reset(buf, L):
    raise NotImplementedError


def dealer_ops(buf, L):
    raise NotImplementedError


def dealer_choose(buf, L, rs):
    raise NotImplementedError


def dealer_card(buf, L, choice):
    raise NotImplementedError


def dealer_commit(buf, L, choice):
    raise NotImplementedError


def dealer_preview(buf, L, rs):
    """card(choose(rs)) without a commit; one call when the dealer fuses them."""
    raise NotImplementedError


def _bind2(stub, name):
    @overload(stub, inline="always")
    def _impl(buf, L):
        k = _kernel_for(L, name)
        if k is not None:
            return lambda buf, L: k(buf, L)


def _bind3(stub, name):
    @overload(stub, inline="always")
    def _impl(buf, L, x):
        k = _kernel_for(L, name)
        if k is not None:
            return lambda buf, L, x: k(buf, L, x)


_bind2(dealer_reset, "reset_k")
_bind2(dealer_ops, "ops_k")
_bind3(dealer_choose, "choose_k")
_bind3(dealer_card, "card_k")
_bind3(dealer_commit, "commit_k")


@overload(dealer_preview, inline="always")
def _preview_impl(buf, L, rs):
    fused = _kernel_for(L, "preview_k")
    if fused is not None:
        return lambda buf, L, rs: fused(buf, L, rs)
    choose, card = _kernel_for(L, "choose_k"), _kernel_for(L, "card_k")
    if choose is not None:
        return lambda buf, L, rs: card(buf, L, choose(buf, L, rs))
