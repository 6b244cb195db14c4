"""Time the numba kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--json PATH]
"""

import argparse
import json
import time

import numpy as np

from fermilat.kernels import NUMBA_AVAILABLE, numba_backend, numpy_backend


def _cases(rng):
    n = 10
    X = rng.standard_normal((1 << n, 1 << n)) + 0j
    x = rng.standard_normal((1 << 4, 1 << 4)) + 0j
    positions = [1, 3, 6, 8]
    stack = rng.standard_normal((1 << 6, 32, 32)) + 0j
    pts = np.array([(i, j) for i in range(40) for j in range(40)], dtype=np.int64)
    grid = np.zeros((44, 44), dtype=bool)
    grid[2:42, 2:42] = True
    offs = np.array([(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)], dtype=np.int64)
    return {
        "embed_matrix 4->10 sites": lambda b: b.embed_matrix(x, n, positions),
        "slice_matrix 10->4 sites": lambda b: b.slice_matrix(X, n, positions),
        "moebius_subsets 6 sites": lambda b: b.moebius_subsets(stack),
        "zeta_subsets 6 sites": lambda b: b.zeta_subsets(stack),
        "surface_count 40x40": lambda b: b.surface_count(grid, pts + 2, offs),
        "translate_count 40x40, a=41": lambda b: b.translate_count(pts, 41),
    }


def _time(fn, repeat):
    fn()  # warm-up (JIT compile for numba)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None)
    args = ap.parse_args()
    if not NUMBA_AVAILABLE:
        print("numba not importable; nothing to compare")
        return
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':32s} {'numpy [ms]':>12s} {'numba [ms]':>12s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, call in _cases(rng).items():
        a, b = call(numpy_backend), call(numba_backend)
        diff = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        tn = _time(lambda: call(numpy_backend), args.repeat)
        tb = _time(lambda: call(numba_backend), args.repeat)
        rows.append({"kernel": name, "numpy_s": tn, "numba_s": tb, "speedup": tn / tb, "max_abs_diff": diff})
        print(f"{name:32s} {tn * 1e3:12.3f} {tb * 1e3:12.3f} {tn / tb:8.1f} {diff:11.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
