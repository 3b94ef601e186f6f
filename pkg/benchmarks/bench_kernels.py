"""Time the coordinate-descent backends on training-sized Lasso batches.

    python3 benchmarks/bench_kernels.py [--k 70] [--m 100] [--n 200] [--repeat 3]

Reports the raw kernel (fixed sweep budget, no early exit) and a full
``solve_coupled_codes`` call for every available backend.
"""

import argparse
import time

import numpy as np

from agingdict import kernels
from agingdict.sparse_coding import solve_coupled_codes


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=int, default=70)
    ap.add_argument("--m", type=int, default=100)
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--sweeps", type=int, default=50)
    ap.add_argument("--lam", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    Wy = rng.standard_normal((args.m, args.k))
    Wo = rng.standard_normal((args.m, args.k))
    Wy /= np.linalg.norm(Wy, axis=0)
    Wo /= np.linalg.norm(Wo, axis=0)
    U = rng.standard_normal((args.m, args.n))
    V = rng.standard_normal((args.m, args.n))
    Q = Wy.T @ Wy + Wo.T @ Wo
    B = Wy.T @ U + Wo.T @ V

    print(f"k={args.k} m={args.m} n={args.n} lam={args.lam} default backend={kernels.BACKEND}")
    print(f"{'backend':<8} {'kernel ' + str(args.sweeps) + ' sweeps':>20} {'solve_coupled_codes':>20}")
    results = {}
    for name in sorted(kernels.BACKENDS):
        raw = best_of(lambda: kernels.lasso_gram_batch(Q, B, args.lam, np.zeros((args.k, args.n)), 0.0,
                                                       args.sweeps, backend=name), args.repeat)
        full = best_of(lambda: solve_coupled_codes(Wy, Wo, U, V, args.lam, backend=name), args.repeat)
        results[name] = (raw, full)
        print(f"{name:<8} {raw:>19.4f}s {full:>19.4f}s")
    if len(results) == 2:
        (r_py, f_py), (r_cy, f_cy) = results["python"], results["cython"]
        print(f"speedup  {r_py / r_cy:>19.1f}x {f_py / f_cy:>19.1f}x")


if __name__ == "__main__":
    main()
