"""Numba vs pure numpy/Python timings for the two hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The numba version is called once before timing so compilation is excluded.
"""
import argparse
import time

import numpy as np

from madm import _kernels, simulate
from madm.model import ModelParams
from madm.qcalc import PowerFactor, TruncationPolicy, grid_length

POLICY = TruncationPolicy(max_terms=100_000)


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def grid_inputs(gamma, a, b, levels):
    n = grid_length(gamma, POLICY)
    pw = gamma ** np.arange(n, dtype=np.float64)
    h = PowerFactor(2, 1)
    Ha = np.tile(h(a * pw), (levels, 1))
    Hb = np.tile(h(b * pw), (levels, 1))
    Hdd = np.tile(h.dd(a * pw, b * pw), (levels, 1))
    return Ha, Hb, Hdd, a, b, gamma


def trajectory(kernel, t_measure):
    p = ModelParams(0.5, 0.2, 0.4, 2)
    cfg = simulate.SimConfig(p, seed=1, t_burn=0.0, t_measure=t_measure, replicas=1, batches=1)
    saved = _kernels.gillespie_chunk
    _kernels.gillespie_chunk = kernel
    try:
        return simulate.run(cfg)
    finally:
        _kernels.gillespie_chunk = saved


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--t-measure", type=float, default=2e3)
    args = ap.parse_args()
    if not _kernels.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")

    print(f"{'kernel':<34}{'numpy (s)':>12}{'numba (s)':>12}{'speedup':>10}")
    for gamma, levels in ((0.9, 3), (0.99, 3), (0.999, 2)):
        args_ = grid_inputs(gamma, 0.2, 0.35, levels)
        _kernels.nested_grid_numba(*args_)
        t_np = best_of(lambda: _kernels.nested_grid_numpy(*args_), args.repeat)
        t_nb = best_of(lambda: _kernels.nested_grid_numba(*args_), args.repeat)
        name = f"nested_grid g={gamma} L={levels} n={args_[0].shape[1]}"
        print(f"{name:<34}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>10.1f}")

    trajectory(_kernels.gillespie_chunk_numba, 10.0)
    t_np = best_of(lambda: trajectory(_kernels.gillespie_chunk_numpy, args.t_measure), 1)
    t_nb = best_of(lambda: trajectory(_kernels.gillespie_chunk_numba, args.t_measure), args.repeat)
    name = f"gillespie N=2 T={args.t_measure:g}"
    print(f"{name:<34}{t_np:>12.5f}{t_nb:>12.5f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
