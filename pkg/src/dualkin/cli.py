"""Command-line interface.

Subcommands:
  simulate   one topology run, printing the trace summary
  sweep      node-count range x repeated trials, CSV + JSON summary out
  verify     invariant suites with one PASS/FAIL line each
  bench      compare the compiled and pure-Python filter-pass kernels
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np


def _parse_nodes(text: str) -> list[int]:
    """'4' -> [4]; '0-6' -> [0..6]; '0,2,5' -> [0, 2, 5]."""
    text = text.strip()
    if "-" in text:
        a, b = text.split("-")
        return list(range(int(a), int(b) + 1))
    if "," in text:
        return [int(v) for v in text.split(",")]
    return [int(text)]


def _load_config(args):
    from .harness import ExperimentConfig

    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for field, attr in (
        ("trials", "trials"),
        ("alpha", "alpha"),
        ("beta1", "beta1"),
        ("duration", "duration"),
        ("seed", "seed"),
        ("transport", "transport"),
        ("timing", "timing"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            overrides[field] = value
    return replace(config, **overrides) if overrides else config


def _add_common(p):
    p.add_argument("--config", help="JSON config file mirroring the experiment fields")
    p.add_argument("--nodes", default=None, help="intermediate node count (or range for sweep)")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--alpha", type=int, default=None, help="growing-strategy increment")
    p.add_argument("--beta1", type=int, default=None, help="first node activation threshold")
    p.add_argument("--duration", type=float, default=None, help="stream length in seconds")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--transport", choices=["inproc", "socket"], default=None)
    p.add_argument("--timing", choices=["wall", "logical"], default=None)
    p.add_argument("--out", default=None, help="output path")


def cmd_simulate(args) -> int:
    from .harness import run_trial

    config = _load_config(args)
    L = _parse_nodes(args.nodes)[0] if args.nodes else config.num_nodes
    row = run_trial(config, L, trial=0)
    print(f"L={row.L} seed={row.seed} timing={config.timing} transport={config.transport}")
    print(f"converged: {row.converged}")
    print(f"T: {row.T:.6g} {'s' if config.timing == 'wall' else 'logical s'}")
    print(f"final parameter error e: {row.e:.6g}")
    print(f"final cost: {row.final_S:.6g}")
    print(f"iterations per node: {list(row.node_iters)}")
    print("parameter updates (stamp, distance to final):")
    for stamp, dist in row.e_timeline:
        print(f"  {stamp:10.4f}  {dist:.6g}")
    if args.out:
        payload = {
            "config": config.echo(),
            "row": {
                "L": row.L, "trial": row.trial, "seed": row.seed, "T": row.T,
                "e": row.e, "final_S": row.final_S,
                "node_iters": list(row.node_iters),
                "theta_star": list(row.theta_star),
                "e_timeline": [list(p) for p in row.e_timeline],
                "converged": row.converged,
            },
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {args.out}")
    return 0


def cmd_sweep(args) -> int:
    from .harness import emit_results, run_sweep

    config = _load_config(args)
    L_values = _parse_nodes(args.nodes) if args.nodes else list(range(0, 7))
    rows, summary = run_sweep(config, L_values)
    out = args.out or "sweep.csv"
    summary_path = out.rsplit(".", 1)[0] + ".summary.json"
    emit_results(rows, out, summary_path=summary_path, config=config)
    for L in sorted(summary, key=int):
        s = summary[L]
        print(
            f"L={L}: trials={s['trials']} converged={s['converged']} "
            f"mean T={s['mean_T']:.6g} mean e={s['mean_e']:.6g} (ci95 {s['ci95_e']:.2g})"
        )
    print(f"wrote {out} and {summary_path}")
    return 0


def cmd_verify(args) -> int:
    from .verify import SUITES, run_all

    suites = args.suite or None
    if suites:
        unknown = set(suites) - set(SUITES)
        if unknown:
            print(f"unknown suites: {sorted(unknown)}; available: {sorted(SUITES)}")
            return 2
    failures = 0
    for suite, name, ok, detail in run_all(suites):
        print(f"{'PASS' if ok else 'FAIL'} [{suite}] {name}: {detail}")
        failures += not ok
    print(f"{failures} failure(s)" if failures else "all checks passed")
    return 1 if failures else 0


def cmd_bench(args) -> int:
    import time

    from . import core
    from .estimation import cost_S
    from .harness import ExperimentConfig, synthesize_dataset

    config = _load_config(args)
    batch = synthesize_dataset(config, config.seed)
    theta = np.asarray(config.theta_true)
    results = {}
    for backend in core.available_backends():
        problem = config.problem(backend=backend)
        cost_S(problem, theta, batch)  # warm up
        reps = args.reps if backend == "compiled" else max(1, args.reps // 10)
        t0 = time.perf_counter()
        for _ in range(reps):
            cost_S(problem, theta, batch)
        per = (time.perf_counter() - t0) / reps
        results[backend] = per
        print(f"{backend:>9}: {per * 1e3:8.3f} ms per cost evaluation ({len(batch)} samples)")
    if len(results) == 2:
        print(f"  speedup: {results['python'] / results['compiled']:.1f}x")
    else:
        print("  compiled kernel not built; only the pure-Python backend was timed")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dualkin",
        description="IMU dual estimation with a progressive in-network pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one topology")
    _add_common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep", help="node-count sweep with repeated trials")
    _add_common(p)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("verify", help="run invariant suites")
    p.add_argument("--suite", action="append", help="limit to a suite (repeatable)")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bench", help="compare filter-pass kernels")
    _add_common(p)
    p.add_argument("--reps", type=int, default=50)
    p.set_defaults(fn=cmd_bench)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
