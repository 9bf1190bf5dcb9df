"""Acceptance checks, shared by the test suite and ``lowmem-dealers verify``.

Each check returns a CheckResult; none of them raises on a failed criterion.
"""
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations

import numpy as np
from scipy import stats

from .codec import decode_run, encode_run, lehmer_width
from .dealers import AdaptiveDealer, PerfectDealer, make_dealer
from .dealers.balanced import sample_strings, string_probability
from .engine import GameConfig, deal_permutations, play_game, run_trials
from .guessers import make_guesser
from .subset_sampler import SubsetSampler
from .urn import Urn
from .wordops import RandomSource, mix

ALPHA = 1e-4


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} [{self.number:2d}] {self.name}: {self.detail}"


def critical(df: int, alpha: float = ALPHA) -> float:
    return float(stats.chi2.ppf(1 - alpha, df))


def chi_square(observed, expected) -> float:
    observed = np.asarray(observed, dtype=float)
    expected = np.asarray(expected, dtype=float)
    return float(((observed - expected) ** 2 / expected).sum())


def harmonic(n: int) -> float:
    return float(sum(Fraction(1, i) for i in range(1, n + 1)))


# 1 ------------------------------------------------------------------------

def check_harmonic(n=1024, trials=20000, seed=42, tol=0.10, budget=60.0) -> CheckResult:
    start = time.perf_counter()
    st = run_trials(GameConfig(dealer="perfect", guesser="remember", n=n, trials=trials, seed=seed))
    secs = time.perf_counter() - start
    h = harmonic(n)
    ok = abs(st.mean - h) <= tol and secs < budget
    return CheckResult(1, "harmonic baseline", ok,
                       f"mean {st.mean:.4f} vs H_{n} {h:.4f} (tol {tol}), {secs:.1f}s (< {budget:.0f}s)")


# 2 ------------------------------------------------------------------------

def permutation_chi_square(kind: str, n=5, games=600_000, seed=1) -> float:
    rows = deal_permutations(make_dealer(kind, n), seed, games)
    # rank each row by its digits in base n+1
    codes = (rows * (n + 1) ** np.arange(n)).sum(axis=1)
    index = {sum(c * (n + 1) ** i for i, c in enumerate(p)): j
             for j, p in enumerate(permutations(range(1, n + 1)))}
    uniq, counts = np.unique(codes, return_counts=True)
    observed = np.zeros(len(index))
    for u, c in zip(uniq, counts):
        observed[index[int(u)]] = c
    return chi_square(observed, np.full(len(index), games / len(index)))


def check_permutation_uniformity(n=5, games=600_000, seed=1, bound=180.0) -> CheckResult:
    scores = {k: permutation_chi_square(k, n, games, seed) for k in ("perfect", "bitmap", "fy")}
    ok = all(v < bound for v in scores.values())
    detail = ", ".join(f"{k} {v:.1f}" for k, v in scores.items())
    return CheckResult(2, "permutation uniformity", ok, f"chi2 {detail} (< {bound:g}, df {math.factorial(n) - 1})")


# 3 ------------------------------------------------------------------------

def adversarial_layouts(n: int, cw: int) -> dict:
    """Member sets stressing different parts of the sampler."""
    cells = range(0, n, cw)
    return {
        "full": set(range(1, n + 1)),
        "one per cell": {c + 1 for c in cells},
        "staircase": {c + j + 1 for k, c in enumerate(cells) for j in range(k % (cw + 1)) if c + j < n},
    }


def sampler_churn(n=256, ops=100_000, seed=3) -> SubsetSampler:
    """Random adds and removes, auditing against a shadow set after every one."""
    ss = SubsetSampler(n)
    rng = np.random.default_rng(seed)
    members = set()
    for e in rng.integers(1, n + 1, size=ops):
        e = int(e)
        if e in members:
            ss.remove(e)
            members.discard(e)
        else:
            ss.add(e)
            members.add(e)
        ss.audit(members)
    return ss


def check_sampler(n=256, ops=100_000, samples=1_000_000, seed=3) -> CheckResult:
    try:
        sampler_churn(n, ops, seed)
        churn = f"{ops} audited ops"
        ok = True
    except AssertionError as exc:
        return CheckResult(3, "subset sampler", False, f"audit failed: {exc}")
    parts = []
    cw = SubsetSampler(n).cellwidth
    for i, (name, members) in enumerate(adversarial_layouts(n, cw).items()):
        ss = SubsetSampler(n)
        for e in sorted(members):
            ss.add(e)
        counts = ss.sample_counts(samples, RandomSource(mix(seed, i + 1)))
        idx = sorted(members)
        if counts.sum() != counts[idx].sum():
            return CheckResult(3, "subset sampler", False, f"{name}: sampled a non-member")
        chi = chi_square(counts[idx], np.full(len(idx), samples / len(idx)))
        crit = critical(len(idx) - 1)
        ok &= chi < crit
        parts.append(f"{name} {chi:.0f}<{crit:.0f}")
    return CheckResult(3, "subset sampler", ok, f"{churn}; chi2 " + ", ".join(parts))


# 4 ------------------------------------------------------------------------

def check_adaptive_invariants(n=4096, d=64, seeds=100) -> CheckResult:
    dealer = AdaptiveDealer(n, d)
    bad, lo, hi, least = 0, 1 << 62, 0, 1 << 62
    for s in range(seeds):
        r = dealer.invariant_scan(RandomSource(mix(s, 0)))
        bad += r["violations"]
        lo, hi, least = min(lo, r["min_total"]), max(hi, r["max_total"]), min(least, r["min_hole"])
    return CheckResult(4, "adaptive holes invariant", bad == 0,
                       f"{bad} violations; hole totals in [{lo}, {hi}] vs [{d}, {2 * d}], min hole {least}")


# 5 ------------------------------------------------------------------------

def predictability_bracket(n: int, d: int) -> tuple:
    return n / (2 * d), 5 * (n / d + math.log(2 * d))


def check_adaptive_bracket(n=4096, d=64, trials=500, k_sims=1000, seed=5) -> CheckResult:
    st = run_trials(GameConfig(dealer="adaptive", guesser="myopic-sim", n=n, d=d, trials=trials,
                               seed=seed, k_sims=k_sims))
    lo, hi = predictability_bracket(n, d)
    return CheckResult(5, "adaptive predictability bracket", lo <= st.mean <= hi,
                       f"mean {st.mean:.2f} (ci95 {st.ci95:.2f}) in [{lo:.0f}, {hi:.0f}]")


# 6 ------------------------------------------------------------------------

def check_lower_bound(n=256, d=16, trials=200, seed=6) -> CheckResult:
    st = run_trials(GameConfig(dealer="adaptive", guesser="myopic-exact", n=n, d=d, trials=trials, seed=seed))
    floor = n / (2 * st.memory_bits)
    return CheckResult(6, "myopic lower bound", st.mean >= floor,
                       f"mean {st.mean:.2f} >= n/(2M) = {floor:.3f} with M = {st.memory_bits} bits")


# 7 ------------------------------------------------------------------------

def max_ops(kind: str, n: int, d: int | None = None, games=2, seed=7) -> tuple:
    st = run_trials(GameConfig(dealer=kind, guesser="remember", n=n, d=d, trials=games, seed=seed))
    return st.max_ops_per_draw, st.mean_uniform_retries


def check_opcount(exps=(10, 12, 14, 16), d=64, games=4) -> CheckResult:
    ok = True
    parts = []
    for kind in ("perfect", "adaptive"):
        res = [max_ops(kind, 1 << e, d if kind == "adaptive" else None, games) for e in exps]
        ops = [r[0] for r in res]
        retries = max(r[1] for r in res)
        ok &= len(set(ops)) == 1 and retries < 2
        parts.append(f"{kind} max ops {ops}, retries {retries:.3f}")
    return CheckResult(7, "constant ops per draw", ok, "; ".join(parts))


# 8 ------------------------------------------------------------------------

def check_memory(n=1 << 14, ds=(16, 64, 256), exps=range(10, 17), cap_adaptive=128, cap_perfect=16) -> CheckResult:
    ad = [AdaptiveDealer(n, d).peak_memory_bits(RandomSource(mix(8, d))) / d for d in ds]
    pf = [PerfectDealer(1 << e).memory_bits / (1 << e) for e in exps]
    ok = max(ad) <= cap_adaptive and max(pf) <= cap_perfect
    return CheckResult(8, "memory linearity", ok,
                       f"adaptive bits/d {[round(x, 1) for x in ad]} <= {cap_adaptive}; "
                       f"perfect bits/n {[round(x, 2) for x in pf]} <= {cap_perfect}")


# 9 ------------------------------------------------------------------------

def codec_round_trips(kind: str, params: dict, L: int, seeds: int) -> tuple:
    """(failures, length mismatches) over ``seeds`` runs."""
    fails = lengths = 0
    dealer = make_dealer(kind, **params)
    width = lehmer_width(L)
    for s in range(seeds):
        truth = play_game(dealer, make_guesser("remember"), s).draws
        enc = encode_run(kind, params, s, L)
        fails += decode_run(enc, kind, params) != truth
        lengths += enc.total_bits != (params["n"] // L) * (dealer.state_bits + width)
    return fails, lengths


def check_codec(seeds=100) -> CheckResult:
    ok = True
    parts = []
    for kind, params, L in (("bitmap", {"n": 256}, 16), ("adaptive", {"n": 512, "d": 16}, 16)):
        fails, lengths = codec_round_trips(kind, params, L, seeds)
        ok &= fails == 0 and lengths == 0
        parts.append(f"{kind} {seeds - fails}/{seeds} exact, {lengths} length mismatches")
    return CheckResult(9, "codec round trip", ok, "; ".join(parts))


# 10 -----------------------------------------------------------------------

def check_urn(m=64, k=8, ops=100_000, samples=1_000_000, seed=10) -> CheckResult:
    urn = Urn(m, k)
    rng = np.random.default_rng(seed)
    counts = [0] * (k + 1)
    try:
        for _ in range(ops):
            c = int(rng.integers(1, k + 1))
            if urn.size < m and (counts[c] == 0 or rng.random() < 0.5):
                urn.add(c)
                counts[c] += 1
            elif counts[c]:
                urn.remove(c)
                counts[c] -= 1
            urn.audit({i: counts[i] for i in range(1, k + 1)})
    except AssertionError as exc:
        return CheckResult(10, "urn", False, f"audit failed: {exc}")
    # top up so every colour is present for the sampling test
    for c in range(1, k + 1):
        while counts[c] < c and urn.size < m:
            urn.add(c)
            counts[c] += 1
    hist = urn.sample_counts(samples, RandomSource(seed))
    live = [c for c in range(1, k + 1) if counts[c]]
    expected = [samples * counts[c] / urn.size for c in live]
    chi = chi_square(hist[live], expected)
    crit = critical(len(live) - 1)
    return CheckResult(10, "urn", chi < crit, f"{ops} audited ops; chi2 {chi:.1f} < {crit:.1f}")


# 11 -----------------------------------------------------------------------

def check_balanced(n=4, samples=700_000, seed=11) -> CheckResult:
    strings = [sum(1 << i for i in ones) for ones in combinations(range(2 * n), n)]
    exact = all(string_probability([(s >> i) & 1 for i in range(2 * n)]) == Fraction(1, len(strings))
                for s in strings)
    drawn = sample_strings(n, samples, RandomSource(seed))
    uniq, counts = np.unique(drawn, return_counts=True)
    stray = set(int(u) for u in uniq) - set(strings)
    obs = dict(zip((int(u) for u in uniq), counts))
    chi = chi_square([obs.get(s, 0) for s in strings], np.full(len(strings), samples / len(strings)))
    crit = critical(len(strings) - 1)
    ok = exact and not stray and chi < crit
    return CheckResult(11, "balanced strings", ok,
                       f"{len(strings)} strings exact 1/{len(strings)}: {exact}; chi2 {chi:.1f} < {crit:.1f}")


# 12 -----------------------------------------------------------------------

def check_prp(n=1000, keys=100, uniform_keys=10_000, seed=12) -> CheckResult:
    bad = 0
    for k in range(keys):
        dealer = make_dealer("prp", n, key=mix(seed, k))
        bad += sorted(dealer.permute(t) for t in range(1, n + 1)) != list(range(1, n + 1))
    first = np.zeros(n + 1)
    for k in range(uniform_keys):
        first[make_dealer("prp", n, key=mix(seed + 1, k)).permute(1)] += 1
    chi = chi_square(first[1:], np.full(n, uniform_keys / n))
    crit = critical(n - 1)
    return CheckResult(12, "PRP dealer", bad == 0 and chi < crit,
                       f"{keys - bad}/{keys} keys bijective; first-output chi2 {chi:.0f} < {crit:.0f}")


CHECKS = {
    1: check_harmonic, 2: check_permutation_uniformity, 3: check_sampler, 4: check_adaptive_invariants,
    5: check_adaptive_bracket, 6: check_lower_bound, 7: check_opcount, 8: check_memory, 9: check_codec,
    10: check_urn, 11: check_balanced, 12: check_prp,
}

SUITES = {
    "uniformity": (2, 3, 10, 11, 12),
    "invariants": (1, 4, 5, 6),
    "codec": (9,),
    "memory": (8,),
    "opcount": (7,),
}


def run_suite(name: str, report=print) -> bool:
    if name not in SUITES:
        raise KeyError(name)
    ok = True
    for number in SUITES[name]:
        res = CHECKS[number]()
        report(res.line())
        ok &= res.passed
    return ok
