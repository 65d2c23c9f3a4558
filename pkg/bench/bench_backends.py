"""Compare the compiled and numpy kernel backends on DA-FPS and FPS.

    python3 bench/bench_backends.py --n 20000 --d 10 --b 2000 --k 50

Both backends must return the same indices; the script checks this and
prints one JSON line per (backend, method) with the selection wall-clock.
"""

import argparse
import json
import sys
import time

import numpy as np

from dafps._backend import AVAILABLE
from dafps.data import PointSet
from dafps.knn import build_table
from dafps.selectors import select_dafps, select_fps


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20_000)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--b", type=int, default=2_000)
    p.add_argument("--k", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    ps = PointSet(np.random.default_rng(args.seed).random((args.n, args.d)))
    table = build_table(ps, args.k)
    runs = {
        "dafps": lambda kern: select_dafps(ps, table, args.b, k=args.k, seed=args.seed, kernels=kern),
        "fps": lambda kern: select_fps(ps, args.b, seed=args.seed, kernels=kern),
    }
    results = {}
    for method, fn in runs.items():
        for name, kern in sorted(AVAILABLE.items()):
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                sel = fn(kern)
                best = min(best, time.perf_counter() - t0)
            results[(method, name)] = sel.indices
            print(json.dumps({"method": method, "backend": name, "n": args.n, "d": args.d, "b": args.b,
                              "k": args.k, "best_seconds": best}))
        picks = {results[(method, name)] == results[(method, "python")] for name in AVAILABLE}
        if picks != {True}:
            print(f"{method}: backends disagree", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
