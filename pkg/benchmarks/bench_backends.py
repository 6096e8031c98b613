"""Benchmark the compiled stepping kernel against the numpy twin.

Times single right-hand-side evaluations and full RK2 stepping on the
workloads the package actually runs: the 1-d product flow with a linear
reaction, the transformed prescribed-curvature flow (table-composed data),
and a 2-d product flow.

Usage: python benchmarks/bench_backends.py [--steps 2000]
"""

import argparse
import time

import numpy as np

import torusflow as tf
from torusflow import flow


def problems():
    grid = tf.PeriodicGrid(1, 256)
    x = grid.coords()[0]
    yield "product 1d (h=-u), res 256", tf.FlowProblem.product(
        grid, tf.parse("-u"), tf.parse("0"), grid.field(0.3 + 0.1 * np.sin(x)), slab=(-1, 1))

    prof = tf.build_profile(tf.parse("cosh(u)"), (-2.5, 2.5), anchor=0.0)
    yield "prescribed-curvature 1d, res 256", tf.FlowProblem.prescribed_curvature(
        grid, tf.parse("(0.2*sin(x1) - u)/cosh(u)"), prof, -2.0, 2.0,
        grid.field(0.2 * np.sin(x)))

    prof2 = tf.build_profile(tf.parse("cosh(u)"), (-1.0, 1.0), anchor=0.0)
    yield "weighted 1d, res 256", tf.FlowProblem.weighted(
        grid, prof2, -1.0, 1.0, grid.field(0.5 + 0.3 * np.sin(x)))

    grid2 = tf.PeriodicGrid(2, 64)
    x1, x2 = grid2.coords()
    yield "product 2d (h=-u), res 64x64", tf.FlowProblem.product(
        grid2, tf.parse("-u"), tf.parse("0"),
        grid2.field(0.3 + 0.1 * np.sin(x1) * np.sin(x2)), slab=(-1, 1))


def time_backend(problem, backend, n_steps):
    ws = problem.workspace(backend)
    state = problem.initial.flat.copy()
    out = np.zeros_like(state)
    dt = flow.cfl_timestep(problem.grid)

    t0 = time.perf_counter()
    for _ in range(200):
        ws.rhs(state, out)
    rhs_rate = 200 / (time.perf_counter() - t0)

    state = problem.initial.flat.copy()
    t0 = time.perf_counter()
    ws.advance(state, n_steps, dt)
    step_rate = n_steps / (time.perf_counter() - t0)
    return rhs_rate, step_rate, state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=2000, help="RK2 steps per timing run")
    args = ap.parse_args()

    if not tf.compiled_available():
        print("compiled extension not built; benchmarking the numpy backend only")
    backends = ["python"] + (["compiled"] if tf.compiled_available() else [])

    print(f"{'workload':<36s} {'backend':<9s} {'rhs evals/s':>12s} {'steps/s':>12s}")
    for name, problem in problems():
        results = {}
        for backend in backends:
            rhs_rate, step_rate, final = time_backend(problem, backend, args.steps)
            results[backend] = (rhs_rate, step_rate, final)
            print(f"{name:<36s} {backend:<9s} {rhs_rate:>12.0f} {step_rate:>12.0f}")
        if len(results) == 2:
            diff = np.abs(results["python"][2] - results["compiled"][2]).max()
            speedup = results["compiled"][1] / results["python"][1]
            print(f"{'':36s} speedup x{speedup:.1f}, max state diff after "
                  f"{args.steps} steps: {diff:.3e}")


if __name__ == "__main__":
    main()
