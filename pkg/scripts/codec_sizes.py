"""Encoded length of one game versus block length, with a round-trip check per row."""
import argparse

from lowmem_dealers.codec import decode_run, encode_run
from lowmem_dealers.engine import play_game
from lowmem_dealers.dealers import make_dealer
from lowmem_dealers.guessers import make_guesser


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--dealer", choices=["bitmap", "adaptive"], default="adaptive")
    p.add_argument("--n", type=int, default=512)
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    a = p.parse_args()
    params = {"n": a.n, "d": a.d} if a.dealer == "adaptive" else {"n": a.n}
    truth = play_game(make_dealer(a.dealer, **params), make_guesser("remember"), a.seed).draws
    print("block,state_bits,perm_bits,total_bits,bits_per_card,round_trip")
    L = 1
    while L <= a.n:
        enc = encode_run(a.dealer, params, a.seed, L)
        ok = decode_run(enc, a.dealer, params) == truth
        print(f"{L},{enc.state_bits},{enc.perm_bits},{enc.total_bits},{enc.total_bits / a.n:.2f},{'ok' if ok else 'mismatch'}")
        L *= 2


if __name__ == "__main__":
    main()
