"""Command-line interface.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from citysim.errors import CitySimError, ConfigError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="citysim", description="City-scale behavior simulation")
    sub = parser.add_subparsers(dest="command", required=True)

    gen_city = sub.add_parser("gen-city", help="generate a synthetic grid city")
    gen_city.add_argument("--nx", type=int, default=4)
    gen_city.add_argument("--ny", type=int, default=4)
    gen_city.add_argument("--pois-per-area", type=int, default=12)
    gen_city.add_argument("--seed", type=int, default=0)
    gen_city.add_argument("--out", required=True)

    gen_personas = sub.add_parser("gen-personas", help="generate a synthetic population")
    gen_personas.add_argument("--n", type=int, required=True)
    gen_personas.add_argument("--seed", type=int, default=0)
    gen_personas.add_argument("--city", required=True)
    gen_personas.add_argument("--spec", default="", help="population spec JSON (optional)")
    gen_personas.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run a simulation from a TOML config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default="", help="override output directory")

    bench = sub.add_parser("bench", help="state-store scalability benchmark")
    bench.add_argument("--agents", default="1000,10000,100000,1000000")
    bench.add_argument("--reps", type=int, default=5)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", default="", help="CSV output path")
    bench.add_argument(
        "--skip-largest", action="store_true", help="skip the 10^6 tier on small machines"
    )

    snapshot = sub.add_parser("snapshot", help="run N days and write a state snapshot")
    snapshot.add_argument("--config", required=True)
    snapshot.add_argument("--at-day", type=int, required=True)
    snapshot.add_argument("--out", required=True)

    restore = sub.add_parser("restore", help="resume a run from a snapshot")
    restore.add_argument("--config", required=True)
    restore.add_argument("--snapshot", required=True)
    restore.add_argument("--out", default="", help="override output directory")

    analyze = sub.add_parser("analyze", help="aggregate an event log into metrics")
    analyze.add_argument("--log", required=True)
    analyze.add_argument(
        "--metric", required=True, choices=["timeuse", "travel", "popularity", "density"]
    )
    analyze.add_argument("--out", required=True, help="output directory")
    analyze.add_argument("--city", default="")
    analyze.add_argument("--personas", default="")
    analyze.add_argument("--ref", default="", help="reference counts CSV (popularity)")
    analyze.add_argument("--cell-m", type=float, default=250.0)
    return parser


def _cmd_gen_city(args) -> int:
    from citysim.world import generate_city, save_city

    city = generate_city(args.nx, args.ny, args.pois_per_area, args.seed)
    save_city(city, args.out)
    print(f"wrote {len(city.pois)} POIs in {len(city.areas)} areas to {args.out}")
    return 0


def _cmd_gen_personas(args) -> int:
    from citysim.persona import PopulationSpec, generate_population, save_personas
    from citysim.world import load_city

    city = load_city(args.city)
    spec = PopulationSpec.from_json(args.spec) if args.spec else None
    personas = generate_population(args.n, city, args.seed, spec)
    save_personas(args.out, personas)
    print(f"wrote {len(personas)} personas to {args.out}")
    return 0


def _cmd_run(args) -> int:
    from citysim.engine import Engine, SimConfig

    config = SimConfig.from_toml(args.config)
    if args.out:
        config.out_dir = args.out
    engine = Engine(config)
    summary = engine.run()
    print(f"completed {summary['days_completed']} days, {summary['events']} events")
    print(f"log: {summary['log_path']}")
    return 0


def _cmd_bench(args) -> int:
    from citysim.bench import format_bench_table, run_bench, write_bench_csv

    tiers = tuple(int(x) for x in args.agents.split(",") if x)
    if args.skip_largest:
        tiers = tuple(t for t in tiers if t < 1_000_000)
    results = run_bench(tiers=tiers, reps=args.reps, seed=args.seed)
    print(format_bench_table(results))
    if args.out:
        write_bench_csv(results, args.out)
        print(f"csv: {args.out}")
    return 0


def _cmd_snapshot(args) -> int:
    from citysim.engine import Engine, SimConfig

    config = SimConfig.from_toml(args.config)
    config.days = args.at_day
    engine = Engine(config)
    engine.run(snapshot_at_day=args.at_day, snapshot_path=args.out)
    print(f"snapshot after day {args.at_day}: {args.out}")
    return 0


def _cmd_restore(args) -> int:
    from citysim.engine import Engine, SimConfig

    config = SimConfig.from_toml(args.config)
    if args.out:
        config.out_dir = args.out
    engine = Engine.restore(args.snapshot, config)
    summary = engine.run()
    print(f"resumed at day {engine.start_day}, completed {summary['days_completed']} more days")
    return 0


def _read_ref_csv(path) -> dict[int, float]:
    import csv as _csv

    counts: dict[int, float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for row in _csv.DictReader(fh):
            counts[int(row["poi_id"])] = float(row["count"])
    return counts


def _cmd_analyze(args) -> int:
    from citysim import analytics

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.metric == "timeuse":
        if not args.personas:
            raise ConfigError("timeuse requires --personas")
        from citysim.persona import load_personas

        table = analytics.timeuse_shares(args.log, load_personas(args.personas))
        analytics.export(table, out_dir / "timeuse.csv", "csv")
        print(f"wrote {out_dir / 'timeuse.csv'}")
    elif args.metric == "travel":
        if not args.personas:
            raise ConfigError("travel requires --personas (for the agent count)")
        from citysim.persona import load_personas

        hist = analytics.travel_histogram(args.log, len(load_personas(args.personas)))
        analytics.export(hist, out_dir / "travel.csv", "csv")
        print(f"wrote {out_dir / 'travel.csv'}")
    elif args.metric == "popularity":
        if not args.ref:
            raise ConfigError("popularity requires --ref")
        sim = analytics.visit_counts(args.log)
        ref = _read_ref_csv(args.ref)
        rho = analytics.spearman(sim, ref)
        payload = {"spearman_rho": rho, "common_pois": len(set(sim) & set(ref))}
        with open(out_dir / "popularity.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"spearman rho = {rho:.4f}")
    else:
        if not args.city:
            raise ConfigError("density requires --city")
        from citysim.world import load_city

        grid = analytics.density_grid(args.log, load_city(args.city), cell_m=args.cell_m)
        analytics.export(grid, out_dir / "density.csv", "csv")
        print(f"wrote {out_dir / 'density.csv'} (total visits {grid.total()})")
    return 0


_COMMANDS = {
    "gen-city": _cmd_gen_city,
    "gen-personas": _cmd_gen_personas,
    "run": _cmd_run,
    "bench": _cmd_bench,
    "snapshot": _cmd_snapshot,
    "restore": _cmd_restore,
    "analyze": _cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CitySimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
