#!/usr/bin/env python3
"""Time the compiled basis kernels against the numpy fallback.

Runs each kernel (forward and d/dx) on a batch of scalars and reports the
best-of-N wall time per backend plus the speedup.  The same functions are
what every basis layer calls in its hot loop, so this is the number that
matters when deciding whether the extension is worth building.

Usage: python benchmarks/bench_kernels.py [--size N] [--repeats R]
"""

import argparse
import time

import numpy as np

from kanforge import kernels


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=65536, help="number of input scalars")
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    x = np.random.default_rng(0).uniform(-1.5, 1.5, args.size)
    cases = [
        ("bspline G=5 k=3", "bspline_features", (x, -1.0, 1.0, 5, 3)),
        ("bspline grad", "bspline_features_grad", (x, -1.0, 1.0, 5, 3)),
        ("rbf G=8", "rbf_features", (x, -2.0, 2.0, 8)),
        ("rbf grad", "rbf_features_grad", (x, -2.0, 2.0, 8)),
        ("fourier g=5", "fourier_features", (x, 5)),
        ("fourier grad", "fourier_features_grad", (x, 5)),
    ]
    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; showing numpy only")

    print(f"size={args.size}, best of {args.repeats}")
    header = f"{'kernel':<16}" + "".join(f"{name:>12}" for name in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, fname, fargs in cases:
        row = f"{label:<16}"
        per = {}
        for name in backends:
            fn = getattr(kernels.get_backend(name), fname)
            fn(*fargs)  # warm up
            per[name] = best_of(lambda: fn(*fargs), args.repeats)
            row += f"{per[name] * 1e3:>10.2f}ms"
        if len(backends) == 2:
            row += f"{per['numpy'] / per['compiled']:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
