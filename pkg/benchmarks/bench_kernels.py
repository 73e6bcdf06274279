"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--n 1000000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import math
import timeit

import numpy as np

from lasercom import _kernels_py

try:
    from lasercom import _kernels
except ImportError:
    _kernels = None


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    z = rng.standard_normal(args.n)
    margins = rng.normal(3.0, 2.0, args.n)
    a = math.exp(-0.5)
    c = math.sqrt(0.3 * (1 - a * a))
    cases = {
        "ar1_filter": lambda m: m.ar1_filter(z, a, c, 0.0, True, math.sqrt(0.3)),
        "span_linear_means": lambda m: m.span_linear_means(margins, 64),
    }
    if _kernels is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'kernel':<20} {'python_s':>10} {'cython_s':>10} {'speedup':>8} {'identical':>9}")
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))
        if _kernels is None:
            print(f"{name:<20} {t_py:10.4f} {'-':>10} {'-':>8} {'-':>9}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
        same = np.array_equal(fn(_kernels_py), fn(_kernels))
        print(f"{name:<20} {t_py:10.4f} {t_cy:10.4f} {t_py / t_cy:8.1f} {str(same):>9}")


if __name__ == "__main__":
    main()
