"""Throughput of the compiled range coder against the pure-Python fallback.

    python benchmarks/bench_rangecoder.py [--symbols N] [--repeat R]

Both backends are run on the same streams; their bytes are checked to be
identical before timings are reported.
"""
import argparse
import time

import numpy as np

from lfinr.codec import _rangecoder_py as pycoder

try:
    from lfinr.codec import _rangecoder as cycoder
except ImportError:
    cycoder = None


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def streams(n, rng):
    yield "uniform/256", rng.integers(0, 256, n), 256
    yield "geometric/256", np.minimum(rng.geometric(0.2, n) - 1, 255), 256
    yield "uniform/4096", rng.integers(0, 4096, n), 4096


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--symbols", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [("python", pycoder)] + ([("cython", cycoder)] if cycoder else [])
    if cycoder is None:
        print("compiled extension not built; timing the Python fallback only")
    print(f"{'stream':<15} {'backend':<8} {'encode Msym/s':>14} {'decode Msym/s':>14} {'bytes':>9}")
    for label, syms, alphabet in streams(args.symbols, rng):
        ref = None
        speeds = {}
        for name, mod in backends:
            te, data = best_of(lambda: mod.encode(syms, alphabet), args.repeat)
            td, back = best_of(lambda: mod.decode(data, syms.size, alphabet), args.repeat)
            assert np.array_equal(back, syms)
            if ref is None:
                ref = data
            assert data == ref, "backends disagree"
            speeds[name] = te + td
            print(f"{label:<15} {name:<8} {syms.size / te / 1e6:>14.2f} "
                  f"{syms.size / td / 1e6:>14.2f} {len(data):>9}")
        if len(speeds) == 2:
            print(f"{'':<15} speedup  {speeds['python'] / speeds['cython']:.1f}x")


if __name__ == "__main__":
    main()
