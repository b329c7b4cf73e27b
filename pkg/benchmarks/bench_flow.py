#!/usr/bin/env python3
"""Time fixed-step RK4 flows on the numpy and numba backends.

    python benchmarks/bench_flow.py [--steps N] [--repeat K]

The first numba call compiles (or loads from HJGEO_CACHE_DIR) and is reported
separately; the timed runs are warm.
"""
import argparse
import time

import numpy as np

from hjgeo import _kernels, dynamics, nonholonomic as nh, symexpr as sx
from hjgeo.geometry import hamiltonian_field


def fields():
    particle = nh.build_hamiltonian_system(nh.MechanicalLagrangian.identity(3),
                                           nh.LinearDistribution(3, (("-q2", "0", "1"),)))
    yield "particle xi_nh", nh.xi_nh(particle).field, [0.0, 0.0, 0.0, 1.0, 0.5, 0.0]
    H = sx.parse("(q1^2 + p1^2)/2 + 0.1*q1^4")
    yield "anharmonic X_H", hamiltonian_field(H, 1), [1.0, 0.0]


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    have_numba = _kernels.numba_available()
    print(f"steps={args.steps}  repeat={args.repeat}  numba={'yes' if have_numba else 'no'}")
    print(f"{'field':<16}{'numpy s':>10}{'numba s':>10}{'compile s':>11}{'speedup':>9}{'max |diff|':>12}")
    for label, field, x0 in fields():
        run = lambda backend: dynamics.flow(field, x0, 0.0, 1e-4, args.steps, backend=backend)  # noqa: E731
        t_np, ref = best_of(lambda: run("numpy"), args.repeat)
        if not have_numba:
            print(f"{label:<16}{t_np:>10.3f}{'-':>10}{'-':>11}{'-':>9}{'-':>12}")
            continue
        start = time.perf_counter()
        run("numba")
        t_compile = time.perf_counter() - start
        t_nb, fast = best_of(lambda: run("numba"), args.repeat)
        diff = float(np.max(np.abs(ref.states - fast.states)))
        print(f"{label:<16}{t_np:>10.3f}{t_nb:>10.3f}{t_compile:>11.3f}{t_np / t_nb:>8.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()
