"""Compare the compiled and numpy sampling kernels.

Usage: python benchmarks/bench_kernels.py [--samples M] [--dim D] [--repeat R]
"""
import argparse
import time

import numpy as np

from mfbm import _kernels_py
from mfbm.kernels import backend


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=65_536)
    p.add_argument("--dim", type=int, default=512)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    m, d = args.samples, args.dim
    impls = {"python": _kernels_py}
    try:
        impls["cython"] = backend("cython")
    except ImportError:
        print("compiled kernels not built; timing the numpy fallback only")
    lam = 1.0 / (np.arange(1, d + 1) - 0.5) ** 2
    X = np.random.default_rng(0).standard_normal((m // 8, d))
    w = np.full(d, 1.0 / d)
    print(f"samples={m} dim={d} repeat={args.repeat}")
    print(f"{'kernel':<14}{'backend':<10}{'seconds':>10}{'Mnormals/s':>12}")
    results = {}
    for name, k in impls.items():
        Z = np.empty((m, d))
        out = np.empty(m)
        out2 = np.empty(X.shape[0])
        rows = [
            ("fill_normals", lambda: k.fill_normals(7, 0, Z), m * d),
            ("chisq_sums", lambda: k.chisq_sums(7, 0, lam, out), m * d),
            ("row_sq_norms", lambda: k.row_sq_norms(X, w, out2), 0),
        ]
        for kname, fn, work in rows:
            t = best_of(fn, args.repeat)
            results[(kname, name)] = t
            rate = f"{work / t / 1e6:12.1f}" if work else f"{'-':>12}"
            print(f"{kname:<14}{name:<10}{t:10.4f}{rate}")
    if "cython" in impls:
        for kname in ("fill_normals", "chisq_sums", "row_sq_norms"):
            print(f"speedup {kname}: {results[(kname, 'python')] / results[(kname, 'cython')]:.2f}x")


if __name__ == "__main__":
    main()
