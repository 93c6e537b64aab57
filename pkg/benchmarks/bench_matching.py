"""Compare the compiled and pure-Python blossom matchers on toric defect sets.

    python benchmarks/bench_matching.py [--repeats 3] [--sizes 4,8,16,32,64]

Prints one line per defect count with the mean time per matching for each
backend and the speedup.  Both backends must return equal-weight matchings.
"""
import argparse
import time

import numpy as np

from toriclab.matching import BACKEND, matching_weight, min_weight_perfect_matching
from toriclab.mwpm import distance_matrix


def instances(n_defects, count, d, rng):
    out = []
    for _ in range(count):
        cells = rng.choice(d * d, size=n_defects, replace=False)
        out.append(distance_matrix(np.stack(np.divmod(cells, d), axis=1), d))
    return out


def timed(weights, backend, repeats):
    best = float("inf")
    for _ in range(repeats):
        t = time.perf_counter()
        results = [min_weight_perfect_matching(w, backend=backend) for w in weights]
        best = min(best, time.perf_counter() - t)
    return best / len(weights), results


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="4,8,16,32,64")
    ap.add_argument("--count", type=int, default=40, help="instances per size")
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if BACKEND != "cython":
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation` first")
    rng = np.random.default_rng(args.seed)
    print(f"{'defects':>8} {'cython_ms':>10} {'python_ms':>10} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        d = max(5, int(np.ceil(np.sqrt(2 * n))))
        ws = instances(n, args.count, d, rng)
        tc, rc = timed(ws, "cython", args.repeats)
        tp, rp = timed(ws, "python", args.repeats)
        for w, a, b in zip(ws, rc, rp):
            assert matching_weight(w, a) == matching_weight(w, b)
        print(f"{n:>8} {tc * 1e3:>10.3f} {tp * 1e3:>10.3f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
