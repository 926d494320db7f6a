"""Benchmark the KSG neighbor-count kernel: numba backend vs numpy fallback.

The kernel dominates per-epoch MI cost, so this is the number that decides
whether numba is worth having. Results are checked for exact agreement
before timing. Run as:

    python benchmarks/bench_knn.py --sizes 500,1000,2000 --dims 8,64 --repeats 3
"""

import argparse
import time

import numpy as np

from infoplane import NUMBA_AVAILABLE
from infoplane.knn import ksg_counts


def time_backend(backend, x, y, k, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        result = ksg_counts(x, y, k, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="500,1000,2000",
                        help="comma-separated sample counts")
    parser.add_argument("--dims", default="2,8,64",
                        help="comma-separated per-ensemble feature widths")
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    sizes = [int(s) for s in args.sizes.split(",")]
    dims = [int(d) for d in args.dims.split(",")]
    rng = np.random.default_rng(args.seed)

    if not NUMBA_AVAILABLE:
        print("numba unavailable or disabled: timing the numpy fallback only\n")
    else:
        # warm the JIT so compilation is not billed to the first row
        w = rng.normal(size=(64, 2))
        ksg_counts(w, w + 1.0, args.k, backend="numba")

    header = f"{'n':>6} {'d':>4} {'numpy (s)':>11}"
    if NUMBA_AVAILABLE:
        header += f" {'numba (s)':>11} {'speedup':>8}"
    print(header)
    for n in sizes:
        for d in dims:
            x = rng.normal(size=(n, d))
            y = 0.6 * x + 0.8 * rng.normal(size=(n, d))
            t_np, r_np = time_backend("numpy", x, y, args.k, args.repeats)
            line = f"{n:>6} {d:>4} {t_np:>11.4f}"
            if NUMBA_AVAILABLE:
                t_nb, r_nb = time_backend("numba", x, y, args.k, args.repeats)
                for a, b in zip(r_np, r_nb):
                    if not np.array_equal(a, b):
                        raise AssertionError(f"backend mismatch at n={n} d={d}")
                line += f" {t_nb:>11.4f} {t_np / t_nb:>7.1f}x"
            print(line)


if __name__ == "__main__":
    main()
