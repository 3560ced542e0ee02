#!/usr/bin/env python3
"""Benchmark the compiled simulation core against the pure-Python twin.

Runs the same fleet and single-server workloads on both backends and
reports events per second plus the speedup.  Outputs are also compared
so a benchmark run doubles as a twin-consistency check.

Usage: python benchmarks/compare_backends.py [--events N] [--r R]
"""

import argparse
import time

import numpy as np

from packsim import configs, fleet, jobs, lp, policy, single_sim
from packsim._backend import available_backends, get_backend


def build_pieces():
    model = jobs.JobModel(2, [[0, 1], [1, 0]], [1, 2], [1, 1])
    space = configs.enumerate_space(2, 3)
    cost = configs.overcommit_cost(space, [[1.0], [2.0]], [3.0])
    sol = lp.solve_lp(lp.assemble_lp(model, space, cost, 0.1))
    pol = policy.build_policy(sol, space)
    dec = policy.decompose(pol, sol, model, space)
    return model, space, cost, sol, pol, dec


def time_backend(impl, runner, plan):
    start = time.perf_counter()
    out = runner(impl, plan)
    elapsed = time.perf_counter() - start
    return out, elapsed


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--events", type=int, default=500_000)
    parser.add_argument("--r", type=float, default=64.0)
    args = parser.parse_args()

    model, space, cost, sol, pol, dec = build_pieces()
    names = available_backends()
    if len(names) < 2:
        print("compiled backend not built; run `pip install -e .` first")

    fleet_plan = fleet.init_world(
        model, space, cost, dec, sol.phi, args.r, seed=12345
    ).kernel_plan
    fleet_plan = dict(fleet_plan)
    fleet_plan["horizon"] = float("inf")
    fleet_plan["max_events"] = args.events

    single_plan = single_sim.build_single_plan(
        pol, model, space, horizon=float("inf"), warmup=0.0, seed=12345,
        max_events=args.events,
    )

    workloads = [
        ("fleet", fleet_plan, "occupancy",
         lambda impl, p: impl.run_fleet(dict(p))),
        ("single-server", single_plan, "occupancy_batches",
         lambda impl, p: impl.run_single(dict(p))),
    ]
    for label, plan, check_key, runner in workloads:
        print(f"\n{label} kernel, {args.events} events (r={args.r:g}):")
        results = {}
        for name in names:
            out, elapsed = time_backend(get_backend(name), runner, plan)
            rate = out["events"] / elapsed
            results[name] = (out, elapsed, rate)
            print(f"  {name:9s} {elapsed:8.3f}s   {rate / 1e6:7.3f} M events/s")
        if len(results) == 2:
            out_a, el_a, _ = results["pure"]
            out_b, el_b, _ = results["compiled"]
            match = (
                np.array_equal(
                    np.asarray(out_a[check_key]), np.asarray(out_b[check_key])
                )
                and out_a["events"] == out_b["events"]
            )
            print(f"  speedup {el_a / el_b:6.1f}x   outputs match: {match}")


if __name__ == "__main__":
    main()
