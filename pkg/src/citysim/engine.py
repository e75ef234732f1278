"""The daily simulation loop, tick barriers, scenario injection, snapshots.

Each tick has two phases: a read phase where agents step against immutable
shared context (parallelizable; agents mutate only their own state and
buffer events) and a single-threaded commit phase that drains buffers in
agent-id order and resolves social interactions.  That makes serial and
parallel runs produce identical per-agent state and identical logs.
"""

from __future__ import annotations

import concurrent.futures
import gzip
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from citysim import social
from citysim.agent import AgentRuntime
from citysim.cognition import apply_need_effects
from citysim.errors import ConfigError, SnapshotError
from citysim.events import EventWriter, dumps_canonical
from citysim.oracle import Oracle, OracleConfig, build_oracle
from citysim.persona import Persona, generate_population, load_personas
from citysim.world import MINUTES_PER_DAY, CityMap, SimClock, WeatherModel, load_city

SNAPSHOT_VERSION = 1

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass
class SimConfig:
    city_path: str = ""
    personas_path: str = ""
    n_agents: int = 0  # generate when personas_path is empty
    days: int = 1
    tick_minutes: int = 5
    seed: int = 0
    oracle: OracleConfig = field(default_factory=OracleConfig)
    workers: int = 0  # 0 or 1 = serial
    out_dir: str = "out"
    log_name: str = "events.jsonl"
    scenario_path: str = ""
    start_month: int = 4

    def validate(self) -> None:
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        if self.tick_minutes < 1 or MINUTES_PER_DAY % self.tick_minutes:
            raise ConfigError("tick_minutes must divide 1440")
        if not self.city_path:
            raise ConfigError("city_path is required")
        if not self.personas_path and self.n_agents <= 0:
            raise ConfigError("either personas_path or n_agents is required")
        try:
            self.oracle.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_toml(cls, path) -> "SimConfig":
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        config = cls()
        oracle_raw = raw.pop("oracle", {})
        for key, value in raw.items():
            if not hasattr(config, key):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(config, key, value)
        for key, value in oracle_raw.items():
            if not hasattr(config.oracle, key):
                raise ConfigError(f"unknown oracle config key {key!r}")
            setattr(config.oracle, key, value)
        config.validate()
        return config


def load_scenario(path) -> list[dict]:
    with open(path, "r", encoding="utf-8") as fh:
        events = json.load(fh)
    if not isinstance(events, list):
        raise ConfigError("scenario file must hold a JSON list")
    return events


class Engine:
    def __init__(
        self,
        config: SimConfig,
        city: CityMap | None = None,
        personas: list[Persona] | None = None,
        oracle: Oracle | None = None,
    ):
        config.validate()
        self.config = config
        self.city = city or load_city(config.city_path)
        if personas is None:
            if config.personas_path:
                personas = load_personas(config.personas_path)
            else:
                personas = generate_population(config.n_agents, self.city, config.seed)
        self.personas = personas
        if config.oracle.backend == "stub":
            config.oracle.seed = config.seed
        self.oracle = oracle or build_oracle(config.oracle)
        self.runtimes = [AgentRuntime(p, self.city, config.seed) for p in personas]
        self.by_id = {rt.persona.agent_id: rt for rt in self.runtimes}
        self.network = social.init_network(personas, config.seed, city=self.city)
        self.clock = SimClock(sim_time=0, tick_minutes=config.tick_minutes)
        self.weather = WeatherModel(_derived_seed(config.seed, "weather"), config.start_month)
        self.start_day = 0
        self.scenario = load_scenario(config.scenario_path) if config.scenario_path else []
        self._pool: concurrent.futures.ThreadPoolExecutor | None = None

    # -- run ----------------------------------------------------------------

    def run(self, snapshot_at_day: int | None = None, snapshot_path=None) -> dict:
        """Simulate config.days days; returns the run summary.

        snapshot_at_day=k drops a snapshot at the boundary after k completed
        days and keeps running.
        """
        out_dir = Path(self.config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        writer = EventWriter(out_dir / self.config.log_name)
        workers = self.config.workers
        if workers and workers > 1:
            self._pool = concurrent.futures.ThreadPoolExecutor(max_workers=workers)
        day_digests = []
        try:
            for day in range(self.start_day, self.config.days):
                self._run_day(day, writer)
                day_digests.append(self.state_digest())
                if snapshot_at_day is not None and day + 1 == snapshot_at_day:
                    self.snapshot(
                        snapshot_path or out_dir / f"snapshot-day{day + 1}.json.gz",
                        events_so_far=writer.count,
                    )
        finally:
            writer.close()
            if self._pool is not None:
                self._pool.shutdown()
                self._pool = None
        summary = {
            "agents": len(self.runtimes),
            "days_completed": self.config.days - self.start_day,
            "events": writer.count,
            "day_digests": day_digests,
            "log_path": str(out_dir / self.config.log_name),
        }
        with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
            fh.write(dumps_canonical(summary))
        return summary

    def _for_each_agent(self, fn) -> None:
        """Apply fn to every runtime, fanning out to the pool when parallel."""
        if self._pool is None:
            for rt in self.runtimes:
                fn(rt)
            return
        chunks = _chunks(self.runtimes, self.config.workers)
        futures = [
            self._pool.submit(lambda part=part: [fn(rt) for rt in part]) for part in chunks
        ]
        for future in futures:
            future.result()

    def _run_day(self, day: int, writer: EventWriter) -> None:
        if day > 0:
            self.weather.advance_day(day)
        is_weekday = day % 7 < 5
        weather = self.weather.state
        for rt in self.runtimes:
            rt.bind_context(self.oracle, weather, is_weekday, day)
        for entry in self.scenario:
            if int(entry.get("day", -1)) == day:
                rt = self.by_id.get(int(entry.get("agent_id", -1)))
                if rt is not None:
                    rt.goals.pending_life_event = str(entry.get("event", "life event"))

        day_start = day * MINUTES_PER_DAY
        self._for_each_agent(lambda rt: rt.begin_day(day_start))
        self._drain(writer)

        ticks_per_day = MINUTES_PER_DAY // self.config.tick_minutes
        for tick_index in range(ticks_per_day):
            now = day_start + tick_index * self.config.tick_minutes
            self.clock.sim_time = now
            self._for_each_agent(lambda rt: rt.step(now, self.config.tick_minutes))
            self._drain(writer)
            if now % social.SOCIAL_TICK_MINUTES == 0:
                self._social_barrier(now, writer)

        day_end = (day + 1) * MINUTES_PER_DAY
        self.clock.sim_time = day_end
        self._for_each_agent(
            lambda rt: rt.end_day(day_end, self.network.contacts_of(rt.persona.agent_id))
        )
        self._drain(writer)
        self._prune_contacts(day_end)

    def _drain(self, writer: EventWriter) -> None:
        for rt in self.runtimes:  # id order fixes the within-tick event order
            for tick, kind, payload in rt.events:
                writer.write(tick, rt.persona.agent_id, kind, payload)
            rt.events.clear()

    # -- social barrier -------------------------------------------------------

    def _available(self, rt: AgentRuntime) -> bool:
        if rt.traveling is not None:
            return False
        return rt.current_activity is None or rt.current_activity.tag != "sleep"

    def _initiation_chance(self, rt: AgentRuntime) -> float:
        extraversion = rt.persona.big_five.get("extraversion", 2)
        chance = 0.15 + 0.075 * (extraversion - 1)
        if "social_butterfly" in rt.persona.habits:
            chance += 0.15
        return chance

    def _social_barrier(self, now: int, writer: EventWriter) -> None:
        groups: dict[int, list[int]] = {}
        for rt in self.runtimes:
            if self._available(rt):
                groups.setdefault(rt.current_poi, []).append(rt.persona.agent_id)
        conversed: set[int] = set()
        for rt in self.runtimes:
            u = rt.persona.agent_id
            if u in conversed or not self._available(rt):
                continue
            if now - rt.last_social_init < social.SOCIAL_TICK_MINUTES:
                continue
            others = [v for v in groups.get(rt.current_poi, []) if v != u and v not in conversed]
            if others and rt.rng.random() < self._initiation_chance(rt):
                partner = social.select_partner(u, others, self.network, rt.rng)
                if partner is not None:
                    self._execute_conversation(rt, self.by_id[partner], "face_to_face", now, writer)
                    conversed.update((u, partner))
                    rt.last_social_init = now
                    rt.online_intent = False
                    continue
            if rt.online_intent:
                rt.online_intent = False
                colocated = set(groups.get(rt.current_poi, []))
                partner = social.pick_online_contact(u, colocated, self.network)
                if partner is not None and partner not in conversed:
                    partner_rt = self.by_id[partner]
                    if self._available(partner_rt):
                        self._execute_conversation(rt, partner_rt, "online", now, writer)
                        conversed.update((u, partner))
                        rt.last_social_init = now

    def _execute_conversation(
        self, rt_u: AgentRuntime, rt_v: AgentRuntime, mode: str, now: int, writer: EventWriter
    ) -> None:
        u, v = rt_u.persona.agent_id, rt_v.persona.agent_id
        edge_uv = self.network.ensure_edge(u, v, now)
        edge_vu = self.network.ensure_edge(v, u, now)
        context = {
            "initiator_name": rt_u.persona.name,
            "partner_name": rt_v.persona.name,
            "edge_u_scalar": round(edge_uv.scalar(), 4),
            "edge_v_scalar": round(edge_vu.scalar(), 4),
            "tick": now,
        }
        outcome, transcript = social.converse(u, v, mode, context, self.oracle)
        social.update_edge(edge_uv, outcome, now)
        social.update_edge(edge_vu, outcome, now)
        text = " / ".join(transcript) if transcript else "a brief exchange"
        for rt, partner_name in ((rt_u, rt_v.persona.name), (rt_v, rt_u.persona.name)):
            rt.temporal.append(now, rt.current_poi, f"talked with {partner_name}: {text}", "social")
            apply_need_effects(
                rt.needs,
                {
                    "agent_id": rt.persona.agent_id,
                    "activity": "conversation",
                    "tag": "social",
                    "completed": True,
                },
                self.oracle,
            )
        self.network.log_contact(u, now, v)
        self.network.log_contact(v, now, u)
        writer.write(now, u, "interaction", {"u": u, "v": v, "mode": mode, "outcome": outcome})

    def _prune_contacts(self, now: int) -> None:
        cutoff = now - 8 * MINUTES_PER_DAY
        for agent_id, log in self.network.contact_log.items():
            if log and log[0][0] < cutoff:
                self.network.contact_log[agent_id] = [(m, p) for m, p in log if m >= cutoff]

    # -- snapshots ----------------------------------------------------------

    def state_digest(self) -> str:
        material = dumps_canonical(
            {
                "agents": [rt.state_digest_material() for rt in self.runtimes],
                "contacts": {str(k): v for k, v in sorted(self.network.contact_log.items())},
                "edges": self.network.to_dict()["edges"],
            }
        )
        return hashlib.sha256(material.encode("utf-8")).hexdigest()

    def snapshot(self, path, events_so_far: int | None = None) -> None:
        """Persist the full state at a day boundary."""
        state = {
            "version": SNAPSHOT_VERSION,
            "seed": self.config.seed,
            "day": self.clock.sim_time // MINUTES_PER_DAY,
            "sim_time": self.clock.sim_time,
            "events_so_far": events_so_far,
            "weather": {
                "condition": self.weather.state.condition,
                "temperature_c": self.weather.state.temperature_c,
                "month": self.weather.state.month,
                "start_month": self.weather.start_month,
                "rng": _encode_weather_rng(self.weather.rng_state()),
            },
            "agents": [rt.to_dict() for rt in self.runtimes],
            "network": self.network.to_dict(),
        }
        raw = dumps_canonical(state).encode("utf-8")
        if str(path).endswith(".gz"):
            with gzip.open(path, "wb") as fh:
                fh.write(raw)
        else:
            with open(path, "wb") as fh:
                fh.write(raw)

    @classmethod
    def restore(cls, path, config: SimConfig) -> "Engine":
        opener = gzip.open if str(path).endswith(".gz") else open
        try:
            with opener(path, "rb") as fh:
                state = json.loads(fh.read().decode("utf-8"))
        except (OSError, ValueError) as exc:
            raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
        if state.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(
                f"snapshot version {state.get('version')} != supported {SNAPSHOT_VERSION}"
            )
        personas = [Persona.from_dict(a["persona"]) for a in state["agents"]]
        engine = cls(config, personas=personas)
        for rt, agent_state in zip(engine.runtimes, state["agents"]):
            rt.restore_from_dict(agent_state)
        engine.network = social.SocialNetwork.from_dict(state["network"])
        engine.clock.sim_time = int(state["sim_time"])
        engine.start_day = int(state["day"])
        weather = state["weather"]
        engine.weather = WeatherModel(0, int(weather["start_month"]))
        engine.weather.state.condition = weather["condition"]
        engine.weather.state.temperature_c = weather["temperature_c"]
        engine.weather.state.month = int(weather["month"])
        engine.weather.set_rng_state(_decode_weather_rng(weather["rng"]))
        return engine


def _derived_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}|{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _encode_weather_rng(state: dict) -> dict:
    return {
        "bit_generator": state["bit_generator"],
        "state": {k: str(v) for k, v in state["state"].items()},
        "has_uint32": state["has_uint32"],
        "uinteger": state["uinteger"],
    }


def _decode_weather_rng(data: dict) -> dict:
    return {
        "bit_generator": data["bit_generator"],
        "state": {k: int(v) for k, v in data["state"].items()},
        "has_uint32": data["has_uint32"],
        "uinteger": data["uinteger"],
    }


def _chunks(items, n: int):
    size = max(1, (len(items) + n - 1) // n)
    return [items[i : i + size] for i in range(0, len(items), size)]
