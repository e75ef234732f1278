#!/usr/bin/env python3
"""Scalability benchmark over the standard population tiers.

Reports mean +/- SD step time per tier and the scaling ratios against the
10^3 baseline; absolute numbers are hardware-bound, the ratios are the
meaningful output.
"""

import argparse

from citysim.bench import format_bench_table, run_bench, write_bench_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--agents", default="1000,10000,100000,1000000")
    parser.add_argument("--reps", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="bench.csv")
    parser.add_argument("--skip-largest", action="store_true")
    args = parser.parse_args()

    tiers = tuple(int(x) for x in args.agents.split(",") if x)
    if args.skip_largest:
        tiers = tuple(t for t in tiers if t < 1_000_000)
    results = run_bench(tiers=tiers, reps=args.reps, seed=args.seed)
    print(format_bench_table(results))
    baseline = next((r for r in results if not r.skipped), None)
    if baseline is not None:
        for row in results:
            if not row.skipped and row.n_agents != baseline.n_agents:
                ratio = row.mean_step_s / baseline.mean_step_s
                print(f"step({row.n_agents:.0e}) / step({baseline.n_agents:.0e}) = {ratio:.2f}x")
    write_bench_csv(results, args.out)
    print(f"csv: {args.out}")


if __name__ == "__main__":
    main()
