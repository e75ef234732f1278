#!/usr/bin/env python3
"""Desk-scale demo: 100 agents, 7 days, stub oracle, full analytics.

Generates a synthetic city, runs the simulation, and drops time-use,
travel, and density CSVs next to the event log.  Everything is seeded, so
two invocations produce identical outputs.
"""

import argparse
import time
from pathlib import Path

from citysim import analytics
from citysim.engine import Engine, SimConfig
from citysim.persona import generate_population
from citysim.world import generate_city, load_city, save_city


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--agents", type=int, default=100)
    parser.add_argument("--days", type=int, default=7)
    parser.add_argument("--seed", type=int, default=2026)
    parser.add_argument("--workers", type=int, default=0)
    parser.add_argument("--out", default="demo_out")
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    city_path = out / "city.json"
    save_city(generate_city(5, 5, 12, seed=args.seed % 1000), city_path)

    config = SimConfig(
        city_path=str(city_path),
        n_agents=args.agents,
        days=args.days,
        seed=args.seed,
        workers=args.workers,
        out_dir=str(out),
    )
    started = time.perf_counter()
    summary = Engine(config).run()
    elapsed = time.perf_counter() - started
    print(f"{args.agents} agents x {args.days} days in {elapsed:.1f}s "
          f"({summary['events']} events)")

    city = load_city(city_path)
    personas = generate_population(args.agents, city, args.seed)
    log = summary["log_path"]

    table = analytics.timeuse_shares(log, personas)
    analytics.export(table, out / "timeuse.csv", "csv")
    hist = analytics.travel_histogram(log, args.agents)
    analytics.export(hist, out / "travel.csv", "csv")
    grid = analytics.density_grid(log, city)
    analytics.export(grid, out / "density.csv", "csv")

    print(f"analytics written to {out}/: timeuse.csv travel.csv density.csv")
    peak_hour = max(range(24), key=lambda h: hist.weekday[h])
    print(f"weekday travel peak: {hist.weekday[peak_hour]:.2f} trips/agent at {peak_hour:02d}:00")


if __name__ == "__main__":
    main()
