#!/usr/bin/env python3
"""Compare the compiled and pure-Python filter-pass kernels.

The filter pass (one full EKF sweep over a measurement batch at fixed
parameters) is the unit of work of every cost evaluation; this script
times both backends on it and on a whole node optimization.
"""

import argparse
import time

import numpy as np

from dualkin import core
from dualkin.estimation import cost_S, optimize_on_node
from dualkin.harness import ExperimentConfig, synthesize_dataset


def timeit(fn, min_reps=3, budget=2.0):
    fn()  # warm-up
    times = []
    start = time.perf_counter()
    while len(times) < min_reps or time.perf_counter() - start < budget:
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
        if len(times) >= 200:
            break
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--duration", type=float, default=None, help="stream seconds")
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()

    config = ExperimentConfig(seed=args.seed)
    if args.duration is not None:
        from dataclasses import replace

        config = replace(config, duration=args.duration)
    batch = synthesize_dataset(config, config.seed)
    theta = np.asarray(config.theta_true)
    print(f"batch: {len(batch)} samples x {batch.y.shape[1]} channels")
    print(f"available backends: {', '.join(core.available_backends())}")

    results = {}
    for backend in core.available_backends():
        problem = config.problem(backend=backend)
        t_cost = timeit(lambda: cost_S(problem, theta, batch))
        results[backend] = t_cost
        print(f"{backend:>9}: cost evaluation {t_cost * 1e3:9.3f} ms")
    if len(results) == 2:
        print(f"  cost-evaluation speedup: {results['python'] / results['compiled']:.1f}x")

    for backend in core.available_backends():
        problem = config.problem(backend=backend)
        prefix = batch.prefix(min(60, len(batch)))
        t0 = time.perf_counter()
        _, rep = optimize_on_node(problem, np.zeros(3), prefix, config.optimizer())
        t_node = time.perf_counter() - t0
        print(
            f"{backend:>9}: node optimization on {len(prefix)} samples "
            f"{t_node * 1e3:9.1f} ms ({rep.iterations} iterations, {rep.cost_evals} evaluations)"
        )


if __name__ == "__main__":
    main()
