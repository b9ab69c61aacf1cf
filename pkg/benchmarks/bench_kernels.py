"""Time the compiled kernels against the numpy fallback.

Runs the two hot loops (batched Euler successors and backward value
iteration) on the MRI benchmark at K=10, checks that both backends return
identical arrays and prints the timings.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--K 10]
"""
import argparse
import time

import numpy as np

from eulersynth import kernels
from eulersynth.benchmarks import build_mri
from eulersynth.bounds import check_hypothesis, system_constants


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--K", type=int, default=10)
    ap.add_argument("--modes", type=int, default=4, help="number of MRI modes to time in the Euler kernel")
    args = ap.parse_args()

    bench = build_mri(K=args.K)
    system, grid = bench.system, bench.grid()
    consts = system_constants(system)
    substeps = check_hypothesis(consts, grid.eps, system.tau).substeps
    Z = grid.centers()
    lo, hi = system.domain.lo, system.domain.hi
    backends = [b for b in ("compiled", "python") if b in kernels.BACKENDS]
    print(f"MRI K={args.K}: {grid.size} cells, {system.n_modes} modes, k={bench.k}; backends {backends}")

    modes = range(min(args.modes, system.n_modes))
    point_steps = sum(substeps[u] for u in modes) * len(Z)
    results = {}
    for name in backends:
        def euler():
            return [kernels.euler_affine_batch(Z, system.modes[u].A, system.modes[u].b, system.tau / substeps[u],
                                               substeps[u], lo, hi, backend=name)[0] for u in modes]
        t, out = best_of(euler, args.repeat)
        results[("euler", name)] = out
        print(f"euler  {name:9s} {t:8.3f} s  {1e9 * t / point_steps:6.1f} ns per point-step")

    succ = np.random.default_rng(0).integers(-1, grid.size, size=(grid.size, system.n_modes)).astype(np.int32)
    v0 = bench.cost(Z)
    for name in backends:
        t, out = best_of(lambda: kernels.value_iteration(succ, v0, bench.k, backend=name), args.repeat)
        results[("dp", name)] = out
        print(f"dp     {name:9s} {t:8.3f} s  {1e9 * t / (bench.k * succ.size):6.1f} ns per edge")

    if len(backends) == 2:
        same_e = all(np.array_equal(a, b) for a, b in zip(results[("euler", "compiled")], results[("euler", "python")]))
        vc, pc = results[("dp", "compiled")]
        vp, pp = results[("dp", "python")]
        print(f"identical results: euler={same_e} dp={np.array_equal(vc, vp) and np.array_equal(pc, pp)}")


if __name__ == "__main__":
    main()
