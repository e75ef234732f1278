import gzip
import json

import pytest

from citysim.engine import Engine, SimConfig
from citysim.errors import ConfigError, SnapshotError
from citysim.events import iter_events
from citysim.oracle import Oracle, OracleConfig
from citysim.world import MINUTES_PER_DAY, generate_city, save_city


@pytest.fixture(scope="module")
def city_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("city") / "city.json"
    save_city(generate_city(4, 4, 12, seed=5), path)
    return str(path)


def make_config(city_path, tmp_path, n=6, days=1, seed=11, **kwargs):
    return SimConfig(
        city_path=city_path, n_agents=n, days=days, seed=seed, out_dir=str(tmp_path / "out"), **kwargs
    )


def collect_segments(log_path):
    """Per (agent, day): [start, end) activity and travel intervals, clipped."""
    segments = {}
    for event in iter_events(log_path):
        if event["kind"] == "activity_end":
            start = event["payload"]["start"]
            end = start + event["payload"]["duration"]
        elif event["kind"] == "move":
            start = event["payload"]["depart"]
            end = event["payload"]["arrive"]
        else:
            continue
        agent = event["agent_id"]
        day_lo = start // MINUTES_PER_DAY
        day_hi = (end - 1) // MINUTES_PER_DAY if end > start else day_lo
        for day in range(day_lo, day_hi + 1):
            lo = max(start, day * MINUTES_PER_DAY)
            hi = min(end, (day + 1) * MINUTES_PER_DAY)
            if hi > lo:
                segments.setdefault((agent, day), []).append((lo, hi, event["kind"]))
    return segments


class TestConfig:
    def test_days_must_be_positive(self, city_path):
        with pytest.raises(ConfigError):
            SimConfig(city_path=city_path, n_agents=1, days=0).validate()

    def test_tick_must_divide_day(self, city_path):
        with pytest.raises(ConfigError):
            SimConfig(city_path=city_path, n_agents=1, tick_minutes=7).validate()

    def test_population_source_required(self, city_path):
        with pytest.raises(ConfigError):
            SimConfig(city_path=city_path).validate()

    def test_toml_round_trip(self, city_path, tmp_path):
        cfg_path = tmp_path / "run.toml"
        cfg_path.write_text(
            f'city_path = "{city_path}"\nn_agents = 4\ndays = 2\nseed = 3\n'
            f'out_dir = "{tmp_path / "out"}"\n\n[oracle]\nbackend = "stub"\ncache = true\n'
        )
        config = SimConfig.from_toml(cfg_path)
        assert (config.n_agents, config.days, config.seed) == (4, 2, 3)
        assert config.oracle.backend == "stub"

    def test_unknown_toml_key_rejected(self, tmp_path):
        cfg_path = tmp_path / "bad.toml"
        cfg_path.write_text('frobnicate = 1\n')
        with pytest.raises(ConfigError):
            SimConfig.from_toml(cfg_path)


class TestRunStructure:
    def test_small_run_is_deterministic(self, city_path, tmp_path):
        s1 = Engine(make_config(city_path, tmp_path / "a")).run()
        s2 = Engine(make_config(city_path, tmp_path / "b")).run()
        log1 = open(s1["log_path"], "rb").read()
        log2 = open(s2["log_path"], "rb").read()
        assert log1 == log2

    def test_need_snapshot_every_tick_and_daily_reflection(self, city_path, tmp_path):
        config = make_config(city_path, tmp_path, n=4, days=2)
        summary = Engine(config).run()
        snapshots = {}
        reflections = {}
        for event in iter_events(summary["log_path"]):
            if event["kind"] == "need_snapshot":
                snapshots[event["agent_id"]] = snapshots.get(event["agent_id"], 0) + 1
            elif event["kind"] == "reflection":
                reflections[event["agent_id"]] = reflections.get(event["agent_id"], 0) + 1
        assert all(count == 2 * 288 for count in snapshots.values())
        assert all(count == 2 for count in reflections.values())
        assert len(snapshots) == 4

    def test_time_is_conserved_per_agent_day(self, city_path, tmp_path):
        config = make_config(city_path, tmp_path, n=6, days=2)
        summary = Engine(config).run()
        segments = collect_segments(summary["log_path"])
        assert len(segments) == 6 * 2
        for (agent, day), intervals in segments.items():
            intervals.sort()
            total = sum(hi - lo for lo, hi, _ in intervals)
            assert total == MINUTES_PER_DAY, f"agent {agent} day {day} covers {total}"
            cursor = day * MINUTES_PER_DAY
            for lo, hi, _ in intervals:
                assert lo == cursor, f"gap/overlap at {lo} for agent {agent}"
                cursor = hi

    def test_never_in_two_places(self, city_path, tmp_path):
        config = make_config(city_path, tmp_path, n=6, days=2)
        summary = Engine(config).run()
        moves = {}
        visits = {}
        for event in iter_events(summary["log_path"]):
            if event["kind"] == "move":
                moves.setdefault(event["agent_id"], []).append(event["payload"])
            elif event["kind"] == "visit":
                visits.setdefault(event["agent_id"], []).append(event)
        for agent, agent_moves in moves.items():
            # travels never overlap and chain origin -> destination
            for earlier, later in zip(agent_moves, agent_moves[1:]):
                assert earlier["arrive"] <= later["depart"]
                assert later["from_poi"] == earlier["to_poi"]
            arrivals = {(m["arrive"], m["to_poi"]) for m in agent_moves}
            for visit in visits.get(agent, []):
                assert (visit["tick"], visit["payload"]["poi"]) in arrivals

    def test_failing_oracle_degrades_to_resting(self, city_path, tmp_path):
        config = make_config(city_path, tmp_path, n=2, days=1)
        from conftest import FailingBackend

        engine = Engine(config, oracle=Oracle(FailingBackend(), cache=False))
        summary = engine.run()
        kinds = set()
        activities = set()
        for event in iter_events(summary["log_path"]):
            kinds.add(event["kind"])
            if event["kind"] == "activity_end":
                activities.add(event["payload"]["tag"])
        assert "need_snapshot" in kinds
        assert activities <= {"rest", "sleep"}
        assert "move" not in kinds  # nobody can plan a trip

    def test_oracle_cache_never_changes_run_semantics(self, city_path, tmp_path):
        from citysim.oracle import OracleConfig

        with_cache = make_config(city_path, tmp_path / "cached", n=4, days=1, seed=6)
        with_cache.oracle = OracleConfig(backend="stub", cache=True)
        without = make_config(city_path, tmp_path / "uncached", n=4, days=1, seed=6)
        without.oracle = OracleConfig(backend="stub", cache=False)
        s1 = Engine(with_cache).run()
        s2 = Engine(without).run()
        assert open(s1["log_path"], "rb").read() == open(s2["log_path"], "rb").read()

    def test_scenario_life_event_triggers_goal_revision(self, city_path, tmp_path):
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps([{"day": 0, "agent_id": 0, "event": "job loss"}]))
        config = make_config(city_path, tmp_path, n=3, days=1, scenario_path=str(scenario))
        summary = Engine(config).run()
        revisions = [
            e
            for e in iter_events(summary["log_path"])
            if e["kind"] == "goal_revision" and e["agent_id"] == 0
        ]
        assert revisions
        assert revisions[0]["payload"]["triggers"]["life_event"]
        assert any("job loss" in g for g in revisions[0]["payload"]["short"])


class TestSnapshots:
    def test_round_trip_log_suffix(self, city_path, tmp_path):
        config = make_config(city_path, tmp_path / "full", n=4, days=3, seed=9)
        snap = tmp_path / "snap.json.gz"
        s1 = Engine(config).run(snapshot_at_day=2, snapshot_path=snap)
        with gzip.open(snap) as fh:
            cut = json.loads(fh.read())["events_so_far"]
        config2 = make_config(city_path, tmp_path / "resumed", n=4, days=3, seed=9)
        s2 = Engine.restore(snap, config2).run()
        full = list(iter_events(s1["log_path"]))[cut:]
        resumed = list(iter_events(s2["log_path"]))
        assert full == resumed
        assert s1["day_digests"][2:] == s2["day_digests"]

    def test_snapshot_of_fresh_engine_is_valid(self, city_path, tmp_path):
        config = make_config(city_path, tmp_path, n=2, days=1)
        engine = Engine(config)
        snap = tmp_path / "fresh.json"
        engine.snapshot(snap)
        restored = Engine.restore(snap, make_config(city_path, tmp_path / "r", n=2, days=1))
        assert restored.start_day == 0
        assert len(restored.runtimes) == 2

    def test_corrupt_snapshot_rejected(self, city_path, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{ this is not json")
        with pytest.raises(SnapshotError):
            Engine.restore(bad, make_config(city_path, tmp_path, n=1, days=1))

    def test_version_mismatch_rejected(self, city_path, tmp_path):
        bad = tmp_path / "old.json"
        bad.write_text(json.dumps({"version": 99}))
        with pytest.raises(SnapshotError):
            Engine.restore(bad, make_config(city_path, tmp_path, n=1, days=1))


class TestParallel:
    def test_parallel_matches_serial_state(self, city_path, tmp_path):
        serial = Engine(make_config(city_path, tmp_path / "s", n=10, days=1, seed=4)).run()
        parallel = Engine(
            make_config(city_path, tmp_path / "p", n=10, days=1, seed=4, workers=4)
        ).run()
        assert serial["day_digests"] == parallel["day_digests"]
        assert (
            open(serial["log_path"], "rb").read() == open(parallel["log_path"], "rb").read()
        )
