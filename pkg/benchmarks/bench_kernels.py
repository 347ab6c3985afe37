"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py --size 128 --repeats 3
"""
import argparse
import time

import numpy as np

from svpe import interp, patterns
from svpe._accel import HAVE_NUMBA, USE_NUMBA


def best_of(fn, repeats):
    fn()  # warm-up; also triggers compilation
    times = []
    for _ in range(repeats):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--k", type=int, default=3)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    backends = ["numpy"] + (["numba"] if USE_NUMBA else [])
    if not USE_NUMBA:
        print(f"numba {'disabled' if HAVE_NUMBA else 'not installed'}; timing numpy only")
    emap = patterns.gen_uniform_random(args.size, args.size, 0)
    cases = {
        "scatter_plan": lambda b: interp.scatter_plan(emap, args.k, backend=b),
        "poisson_fill": lambda b: patterns.poisson_fill(args.size, args.size, 0, backend=b),
    }
    print(f"{'kernel':<14}{'backend':<8}{'seconds':>10}")
    results = {}
    for name, fn in cases.items():
        for b in backends:
            results[name, b] = best_of(lambda: fn(b), args.repeats)
            print(f"{name:<14}{b:<8}{results[name, b]:>10.4f}")
        if len(backends) == 2:
            print(f"{name:<14}{'speedup':<8}{results[name, 'numpy'] / results[name, 'numba']:>9.1f}x")
    # both backends must agree bit for bit
    if len(backends) == 2:
        a = interp.scatter_plan(emap, args.k, backend="numpy")
        b = interp.scatter_plan(emap, args.k, backend="numba")
        assert np.array_equal(a.idx, b.idx) and np.array_equal(a.weights, b.weights)


if __name__ == "__main__":
    main()
