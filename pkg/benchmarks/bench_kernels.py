"""Compare the numba and numpy backends of the solver kernels.

Usage:
    python benchmarks/bench_kernels.py [--dr 0.01] [--tmax 10] [--repeat 3]

Both backends are imported from the same module, so one process times
both. The first numba call (JIT compile or cache load) is excluded.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from stimemit import kernels
from stimemit.core import Grid1D, PhysParams, make_exponential_pulse


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--dr", type=float, default=0.01)
    ap.add_argument("--tmax", type=float, default=10.0)
    ap.add_argument("--delta", type=float, default=3.0)
    ap.add_argument("--detuning", type=float, default=0.5)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    params = PhysParams(delta=args.delta, detuning=args.detuning)
    grid = Grid1D.for_run(args.delta, args.tmax, dr=args.dr)
    pulse = make_exponential_pulse(params, grid)
    base = np.zeros((grid.n_steps + 1, grid.n_cells), dtype=complex)
    base[0] = pulse.amplitude
    h, o, det = grid.dr, grid.origin, params.detuning

    def run_evolve(fn):
        psi = base.copy()
        fn(psi, o, 1.0, 1.0, det, h)
        return psi

    if not kernels.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return 1
    ref = run_evolve(kernels.evolve_numba)  # warm-up
    kernels.pair_cross_numba(ref, o, grid.n_steps, det, h)

    rows = []
    t_nb = best_of(lambda: run_evolve(kernels.evolve_numba), args.repeat)
    t_np = best_of(lambda: run_evolve(kernels.evolve_numpy), args.repeat)
    diff = np.max(np.abs(ref - run_evolve(kernels.evolve_numpy)))
    rows.append(("evolve", t_nb, t_np, diff))

    n = grid.n_steps
    c_nb = kernels.pair_cross_numba(ref, o, n, det, h)
    c_np = kernels.pair_cross_numpy(ref, o, n, det, h)
    t_nb = best_of(lambda: kernels.pair_cross_numba(ref, o, n, det, h), args.repeat)
    t_np = best_of(lambda: kernels.pair_cross_numpy(ref, o, n, det, h), args.repeat)
    rows.append(("pair_cross", t_nb, t_np, abs(c_nb - c_np)))

    print(f"grid: {grid.n_steps + 1} steps x {grid.n_cells} cells (dr={h:g})")
    print(f"{'kernel':<12}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, a, b, d in rows:
        print(f"{name:<12}{a:>12.4f}{b:>12.4f}{b / a:>10.1f}{d:>12.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
