"""Run the acceptance checks (all, or the numbers given) and print one line each."""
import sys
import time

from lowmem_dealers.checks import CHECKS


def main(argv):
    numbers = [int(x) for x in argv] or sorted(CHECKS)
    failed = 0
    for k in numbers:
        start = time.perf_counter()
        res = CHECKS[k]()
        failed += not res.passed
        print(f"{res.line()} [{time.perf_counter() - start:.1f}s]", flush=True)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
