"""Score of the simulated myopic guesser against the adaptive dealer as d doubles.

Writes the usual result CSV plus a ratio column; the score should roughly halve
each time the number of decks doubles.
"""
import argparse
import csv
import sys

from lowmem_dealers.cli import HEADER, result_row
from lowmem_dealers.engine import GameConfig


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--d-list", default="16,32,64,128")
    p.add_argument("--trials", type=int, default=40)
    p.add_argument("--k-sims", type=int)
    p.add_argument("--seed", type=int, default=3)
    a = p.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(HEADER + ["ratio_to_previous"])
    prev = None
    for d in (int(x) for x in a.d_list.split(",")):
        cfg = GameConfig(dealer="adaptive", guesser="myopic-sim", n=a.n, d=d, trials=a.trials,
                         seed=a.seed, k_sims=a.k_sims)
        row = result_row(cfg, timed=True)
        mean = float(row[6])
        w.writerow(row + ["" if prev is None else f"{prev / mean:.3f}"])
        sys.stdout.flush()
        prev = mean


if __name__ == "__main__":
    main()
