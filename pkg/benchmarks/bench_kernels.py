"""Numba vs NumPy timings for the hot kernels.

    python3 benchmarks/bench_kernels.py [--paths 1000000] [--grid 4096] [--repeat 5]

Each kernel is called once per backend before timing so numba's compile
cost stays out of the numbers.  Results are checked for agreement too.
"""

import argparse
import time

import numpy as np

from ruin_asym import kernels, mc
from ruin_asym.config import load_preset
from ruin_asym.dist import Exponential


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def path_case(paths):
    s, _ = load_preset("pareto-s4")
    b = mc.draw_batch(s, paths, mc.streams(2024))
    kw = dict(r=s.r, t=s.t, with_byclaims=True)
    return lambda backend: kernels.path_sums(b.tau, b.counts, b.claims, b.delays, b.byclaims,
                                             backend=backend, **kw)


def pair_case(paths):
    rng = np.random.default_rng(7)
    counts = rng.poisson(2.0, paths)
    total = int(counts.sum())
    hits, weights = rng.random(total), rng.random(total)
    return lambda backend: kernels.pair_products(counts, hits, weights, backend=backend)


def renewal_case(grid):
    cdf = Exponential(0.2).cdf(np.linspace(0.0, 10.0, grid + 1))
    return lambda backend: kernels.solve_renewal(cdf, backend=backend)


def convolve_case(grid):
    g = np.linspace(0.0, 10.0, grid + 1)
    values, cdf = 0.2 * g, Exponential(0.2).cdf(g)
    return lambda backend: kernels.stieltjes_convolve(values, cdf, backend=backend)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=1_000_000)
    ap.add_argument("--grid", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.NUMBA_AVAILABLE:
        raise SystemExit("numba is not installed; nothing to compare")

    cases = [
        (f"path_sums ({args.paths} paths)", path_case(args.paths)),
        (f"pair_products ({args.paths} paths)", pair_case(args.paths)),
        (f"solve_renewal ({args.grid} steps)", renewal_case(args.grid)),
        (f"stieltjes_convolve ({args.grid} steps)", convolve_case(args.grid)),
    ]
    print(f"{'kernel':<36}{'numpy s':>11}{'numba s':>11}{'speedup':>9}{'max |diff|':>13}")
    for name, call in cases:
        ref, fast = call("numpy"), call("numba")  # warm-up, includes jit compile
        diff = float(np.max(np.abs(ref - fast))) if ref.size else 0.0
        t_np = best_of(lambda: call("numpy"), args.repeat)
        t_nb = best_of(lambda: call("numba"), args.repeat)
        print(f"{name:<36}{t_np:>11.4f}{t_nb:>11.4f}{t_np / t_nb:>9.1f}{diff:>13.2e}")


if __name__ == "__main__":
    main()
