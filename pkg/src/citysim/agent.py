"""Per-agent runtime: the state machine one agent executes each tick.

A step touches only the agent's own state plus immutable shared context
(city, clock, weather), so steps can run in parallel; everything social is
resolved by the engine at the tick barrier.  All randomness flows through
the agent's own seeded generator, keeping serial and parallel runs
identical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from citysim import behavior, cognition, social
from citysim.cognition import GoalSet, NeedsState, dispatch, dominant_need
from citysim.memory import (
    BeliefVector,
    ReflectiveEntry,
    SpatialMemory,
    TemporalMemory,
    decay_beliefs,
    impute_beliefs_batch,
    nightly_reflection,
)
from citysim.errors import InvalidIntentionError
from citysim.oracle import Oracle, appraise_visit
from citysim.persona import Persona
from citysim.world import MINUTES_PER_DAY, CityMap, Poi, candidate_pois, distance

logger = logging.getLogger(__name__)

# Need -> activity tag that serves it; used to avoid re-interrupting while
# already on the way to (or in) a need-serving activity.
NEED_SERVE_TAG = {"hunger": "eat", "energy": "rest", "safety": "rest", "social": "social"}


@dataclass(slots=True)
class Travel:
    origin_poi: int
    dest_poi: int
    depart: int
    arrive: int
    vehicle: str
    serve_tag: str
    activity: str

    def to_dict(self) -> dict:
        return {
            "origin_poi": self.origin_poi,
            "dest_poi": self.dest_poi,
            "depart": self.depart,
            "arrive": self.arrive,
            "vehicle": self.vehicle,
            "serve_tag": self.serve_tag,
            "activity": self.activity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Travel":
        return cls(**data)


@dataclass(slots=True)
class Activity:
    content: str
    tag: str
    start: int
    poi_id: int

    def to_dict(self) -> dict:
        return {"content": self.content, "tag": self.tag, "start": self.start, "poi_id": self.poi_id}

    @classmethod
    def from_dict(cls, data: dict) -> "Activity":
        return cls(**data)


class AgentRuntime:
    """Owns one agent's mutable state and its tick behavior."""

    def __init__(self, persona: Persona, city: CityMap, run_seed: int):
        self.persona = persona
        self.city = city
        self.rng = np.random.default_rng(run_seed ^ persona.agent_id)
        self.needs = NeedsState()
        self.goals = GoalSet()
        self.temporal = TemporalMemory()
        self.reflective: list[ReflectiveEntry] = []
        self.spatial = SpatialMemory()
        self.schedule: behavior.DaySchedule | None = None
        self.current_poi: int = persona.home_poi
        self.traveling: Travel | None = None
        self.current_activity: Activity | None = None
        self.last_social_init: int = -(10**9)
        self.online_intent: bool = False
        self.day_samples: list[dict[str, float]] = []
        self.visit_log: list[tuple[int, int]] = []
        self.events: list[tuple[int, str, dict]] = []  # tick-local buffer

    # -- shared context, set by the engine before each phase ---------------

    def bind_context(self, oracle: Oracle, weather, is_weekday: bool, day: int) -> None:
        self.oracle = oracle
        self.weather = weather
        self.is_weekday = is_weekday
        self.day = day

    @property
    def position(self) -> tuple[float, float]:
        return self.city.poi_by_id[self.current_poi].position

    def owns_car(self) -> bool:
        return self.persona.age >= 18 and self.persona.income >= 280_000.0

    def available_vehicles(self) -> list[str]:
        vehicles = ["walk", "bicycle"]
        if self.owns_car():
            vehicles.append("car")
        vehicles += ["bus", "train"]
        return vehicles

    def emit(self, tick: int, kind: str, payload: dict) -> None:
        self.events.append((tick, kind, payload))

    # -- day boundary -------------------------------------------------------

    def begin_day(self, now: int) -> None:
        day_context = {"day": self.day, "weather": self.weather.condition}
        self.needs = cognition.init_needs(self.persona, day_context, self.oracle)
        schedule = behavior.plan_mandatory(self.persona, self.is_weekday, self.oracle)
        self.schedule = behavior.fill_medium(schedule, self.persona, self.oracle)
        self.day_samples = []

    def end_day(self, now: int, contact_log: list[tuple[int, int]]) -> None:
        if self.current_activity is not None:
            self._finish_activity(now)
        entries = nightly_reflection(
            self.temporal,
            self.reflective,
            self.oracle,
            {"agent_id": self.persona.agent_id},
            self.day,
        )
        self.emit(now, "reflection", {"insights": len(entries)})
        decay_beliefs(self.spatial)
        fulfillment = cognition.need_fulfillment(self.day_samples, self.needs.thresholds)
        report = cognition.goal_triggers(
            self.persona,
            self.goals,
            contact_log,
            self.visit_log,
            {pid: b.dims[2] for pid, b in self.spatial.beliefs.items()},
            self.day,
        )
        if report.any():
            cognition.revise_goals(self.goals, self.persona, report, self.day, self.oracle)
            if self.goals.last_revision == self.day:
                self.emit(
                    now,
                    "goal_revision",
                    {
                        "triggers": report.to_dict(),
                        "fulfillment": round(fulfillment, 4),
                        "short": list(self.goals.short_goals),
                        "long": list(self.goals.long_goals),
                    },
                )
        self._prune_logs(now)

    def _prune_logs(self, now: int) -> None:
        cutoff = now - 31 * MINUTES_PER_DAY
        self.visit_log = [(m, p) for m, p in self.visit_log if m >= cutoff]

    # -- tick ----------------------------------------------------------------

    def step(self, now: int, tick_minutes: int) -> None:
        """One tick: decay, arrivals, dominant-need checks, plan following."""
        cognition.decay_needs(self.needs, tick_minutes)
        scores = {n: round(self.needs.scores[n], 6) for n in cognition.NEED_NAMES}
        self.day_samples.append(scores)
        self.emit(now, "need_snapshot", {"s": scores})

        minute = now % MINUTES_PER_DAY

        if self.traveling is not None:
            if now < self.traveling.arrive:
                return
            self._arrive(now)
            return

        block_index = self.schedule.index_at(minute)
        block = self.schedule.blocks[block_index]

        # Close the previous activity when its block has ended.
        if self.current_activity is not None:
            active_block = self.schedule.block_at(self.current_activity.start % MINUTES_PER_DAY)
            if block.start != active_block.start:
                self._finish_activity(now)

        dominant = dominant_need(self.needs, self.persona)
        if (
            dominant is not None
            and block.tier != "mandatory"
            and not self._is_serving(dominant)
        ):
            decision = dispatch(self._observation(dominant, block), self.oracle)
            if decision.module_choice == "place_selection":
                self._interrupt(now, minute, dominant, decision.parameters)
                return
            if decision.module_choice == "social":
                self._consider_online(now, block)
                # fall through: keep following the plan while waiting

        if self.current_activity is None:
            self._enter_block(now, minute)

    def _observation(self, dominant: str | None, block: behavior.TimeBlock) -> dict:
        return {
            "agent_id": self.persona.agent_id,
            "occupation": self.persona.occupation,
            "dominant": dominant,
            "block_tier": block.tier,
            "at_empty_leisure_start": block.is_empty and self.current_activity is None,
        }

    def _is_serving(self, need: str) -> bool:
        tag = NEED_SERVE_TAG[need]
        if self.traveling is not None and self.traveling.serve_tag == tag:
            return True
        return self.current_activity is not None and self.current_activity.tag == tag

    def _consider_online(self, now: int, block: behavior.TimeBlock) -> None:
        if now - self.last_social_init < social.SOCIAL_TICK_MINUTES:
            return
        if social.should_contact_online(self.needs, now % MINUTES_PER_DAY, block.tier):
            self.online_intent = True

    # -- interruption ----------------------------------------------------------

    def _interrupt(self, now: int, minute: int, need: str, params: dict) -> None:
        if self.current_activity is not None:
            self._finish_activity(now)
        self.schedule = behavior.interrupt_and_replan(self.schedule, need, minute)
        self.emit(now, "interruption", {"need": need, "minute": minute})
        serve_block = self.schedule.block_at(minute)
        categories = [c for c in params.get("categories", []) if isinstance(c, str)]
        activity = str(params.get("activity", serve_block.content))
        if categories == ["home"]:
            self._move_or_start(now, minute, self.persona.home_poi, serve_block, activity)
        elif categories:
            self._move_via_gravity(now, minute, set(categories), serve_block, activity)
        else:
            self._start_activity(now, serve_block)

    # -- plan following ----------------------------------------------------------

    def _enter_block(self, now: int, minute: int) -> None:
        index = self.schedule.index_at(minute)
        block = self.schedule.blocks[index]
        if block.is_empty:
            decision = dispatch(self._observation(None, block), self.oracle)
            if decision.module_choice == "planning":
                candidate = behavior.fill_leisure_block(block, self._leisure_context(), self.oracle)
                index = behavior.set_leisure_activity(self.schedule, index, candidate)
                block = self.schedule.blocks[index]
                if candidate.category is not None:
                    self._move_via_gravity(
                        now, minute, {candidate.category}, block, candidate.description
                    )
                    return
                if "home" in candidate.description and self.current_poi != self.persona.home_poi:
                    self._move_or_start(now, minute, self.persona.home_poi, block, candidate.description)
                    return
                self._start_activity(now, block)
                return
            # Fallback: rest in place for the whole block.
            rest = behavior.ActivityCandidate(
                description="rest at current location",
                duration=block.duration,
                imagined={n: 0.5 for n in cognition.NEED_NAMES},
                category=None,
                tag="rest",
                goal_tags=[],
            )
            index = behavior.set_leisure_activity(self.schedule, index, rest)
            self._start_activity(now, self.schedule.blocks[index])
            return
        target = block.poi_id
        if target is not None and target != self.current_poi:
            self._move_or_start(now, minute, target, block, block.content)
        else:
            self._start_activity(now, block)

    def _leisure_context(self) -> dict:
        return {
            "agent_id": self.persona.agent_id,
            "day": self.day,
            "needs": {n: round(self.needs.scores[n], 4) for n in cognition.NEED_NAMES},
            "hobbies": list(self.persona.hobbies),
            "habits": list(self.persona.habits),
            "goal_tags": sorted(set(self.goals.tags)),
            "at_home": self.current_poi == self.persona.home_poi,
            "is_weekend": not self.is_weekday,
            "weather": self.weather.condition,
        }

    # -- movement ----------------------------------------------------------

    def _move_via_gravity(
        self, now: int, minute: int, categories: set[str], block: behavior.TimeBlock, activity: str
    ) -> None:
        """select_area -> intention -> candidates -> gravity -> vehicle."""
        current_area = self.city.poi_by_id[self.current_poi].area_id
        area = behavior.select_area(self.position, current_area, activity, self.city, self.oracle)
        hint = next(iter(categories)) if len(categories) == 1 else None
        try:
            cats, radius = behavior.extract_intention(
                activity, {"category_hint": hint}, self.oracle
            )
        except InvalidIntentionError:
            cats, radius = categories, 2000.0
        pool = candidate_pois(self.city, area, cats)
        if not pool:
            pool = sorted(
                (p for c in sorted(cats) for p in self.city.pois_of_category(c)),
                key=lambda p: (distance(self.position, p.position), p.id),
            )[:200]
        if not pool:
            logger.warning(
                "agent %s found no POI for %s; resting in place", self.persona.agent_id, sorted(cats)
            )
            self._start_activity(now, block)
            return
        within = [p for p in pool if distance(self.position, p.position) <= radius]
        if within:
            pool = within
        beliefs = self._beliefs_for(pool)
        target, _ = behavior.gravity_select(self.position, pool, beliefs, self.rng)
        self._move_or_start(now, minute, target.id, block, activity)

    def _beliefs_for(self, pool: list[Poi]) -> list[BeliefVector]:
        known = self.spatial.beliefs
        unvisited = [p for p in pool if p.id not in known]
        imputed = impute_beliefs_batch(self.spatial, unvisited, self.city)
        return [known.get(p.id) or imputed[p.id] for p in pool]

    def _move_or_start(
        self, now: int, minute: int, target_poi: int, block: behavior.TimeBlock, activity: str
    ) -> None:
        if target_poi == self.current_poi:
            block.poi_id = target_poi
            self._start_activity(now, block)
            return
        origin = self.city.poi_by_id[self.current_poi]
        dest = self.city.poi_by_id[target_poi]
        d = distance(origin.position, dest.position)
        trip = behavior.TripContext(
            distance_m=d,
            minute_of_day=minute,
            month=self.weather.month,
            weather=self.weather.condition,
            temperature_c=self.weather.temperature_c,
            persona_digest={"agent_id": self.persona.agent_id, "age": self.persona.age},
            available=self.available_vehicles(),
        )
        vehicle, justification = behavior.select_vehicle(trip, self.oracle)
        minutes = behavior.travel_minutes(d, vehicle)
        block.poi_id = target_poi
        self.traveling = Travel(
            origin_poi=origin.id,
            dest_poi=dest.id,
            depart=now,
            arrive=now + minutes,
            vehicle=vehicle,
            serve_tag=block.tag,
            activity=activity,
        )
        self.emit(
            now,
            "move",
            {
                "from_poi": origin.id,
                "to_poi": dest.id,
                "vehicle": vehicle,
                "depart": now,
                "arrive": now + minutes,
                "distance_m": round(d, 1),
            },
        )
        node = self.temporal.append(
            now, origin.id, f"departed for {dest.name} by {vehicle}", "travel"
        )
        entry_id = self.reflective[-1].entry_id + 1 if self.reflective else 0
        self.reflective.append(ReflectiveEntry(entry_id, justification, [node], self.day))

    def _arrive(self, now: int) -> None:
        travel = self.traveling
        self.traveling = None
        self.current_poi = travel.dest_poi
        poi = self.city.poi_by_id[travel.dest_poi]
        self.emit(
            now,
            "visit",
            {
                "poi": poi.id,
                "category": poi.category,
                "position": [round(poi.position[0], 1), round(poi.position[1], 1)],
            },
        )
        self.visit_log.append((now, poi.id))
        appraisal = appraise_visit(
            self.oracle,
            self.persona.agent_id,
            {"id": poi.id, "name": poi.name, "category": poi.category, "popularity": poi.popularity},
        )
        node = self.temporal.append(now, poi.id, f"arrived at {poi.name}", "visit")
        if appraisal is not None:
            observation, reasoning = appraisal
            self.spatial.observe(poi.id, observation, now)
            entry_id = self.reflective[-1].entry_id + 1 if self.reflective else 0
            self.reflective.append(ReflectiveEntry(entry_id, reasoning, [node], self.day))
        # Re-enter the schedule at the arrival minute.
        minute = now % MINUTES_PER_DAY
        block = self.schedule.block_at(minute)
        if block.poi_id in (None, self.current_poi) or block.is_empty:
            if block.is_empty:
                self._enter_block(now, minute)
            else:
                self._start_activity(now, block)
        else:
            self._enter_block(now, minute)

    # -- activities ----------------------------------------------------------

    def _start_activity(self, now: int, block: behavior.TimeBlock) -> None:
        content = block.content or "rest at current location"
        tag = block.tag or "rest"
        self.current_activity = Activity(content=content, tag=tag, start=now, poi_id=self.current_poi)
        self.emit(
            now,
            "activity_start",
            {"content": content, "tag": tag, "poi": self.current_poi, "tier": block.tier},
        )
        self.temporal.append(now, self.current_poi, f"started {content}", tag or "activity")

    def _finish_activity(self, now: int) -> None:
        activity = self.current_activity
        self.current_activity = None
        if activity is None:
            return
        self.emit(
            now,
            "activity_end",
            {
                "content": activity.content,
                "tag": activity.tag,
                "poi": activity.poi_id,
                "start": activity.start,
                "duration": now - activity.start,
            },
        )
        outcome = {
            "agent_id": self.persona.agent_id,
            "activity": activity.content,
            "tag": activity.tag,
            "completed": True,
        }
        cognition.apply_need_effects(self.needs, outcome, self.oracle)

    # -- snapshot ----------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "persona": self.persona.to_dict(),
            "needs": self.needs.to_dict(),
            "goals": self.goals.to_dict(),
            "temporal": self.temporal.to_dict(),
            "reflective": [[e.entry_id, e.text, e.evidence, e.day] for e in self.reflective],
            "spatial": self.spatial.to_dict(),
            "current_poi": self.current_poi,
            "traveling": None if self.traveling is None else self.traveling.to_dict(),
            "current_activity": None
            if self.current_activity is None
            else self.current_activity.to_dict(),
            "last_social_init": self.last_social_init,
            "online_intent": self.online_intent,
            "visit_log": [list(v) for v in self.visit_log],
            "rng_state": _encode_rng_state(self.rng.bit_generator.state),
        }

    def restore_from_dict(self, data: dict) -> None:
        self.needs = NeedsState.from_dict(data["needs"])
        self.goals = GoalSet.from_dict(data["goals"])
        self.temporal = TemporalMemory.from_dict(data["temporal"])
        self.reflective = [
            ReflectiveEntry(e[0], e[1], list(e[2]), e[3]) for e in data["reflective"]
        ]
        self.spatial = SpatialMemory.from_dict(data["spatial"])
        self.current_poi = int(data["current_poi"])
        self.traveling = None if data["traveling"] is None else Travel.from_dict(data["traveling"])
        self.current_activity = (
            None if data["current_activity"] is None else Activity.from_dict(data["current_activity"])
        )
        self.last_social_init = int(data["last_social_init"])
        self.online_intent = bool(data.get("online_intent", False))
        self.visit_log = [(int(m), int(p)) for m, p in data["visit_log"]]
        self.rng.bit_generator.state = _decode_rng_state(data["rng_state"])

    def state_digest_material(self) -> dict:
        """Day-boundary state used for serial-vs-parallel consistency checks."""
        return {
            "agent": self.persona.agent_id,
            "needs": {n: round(self.needs.scores[n], 12) for n in cognition.NEED_NAMES},
            "poi": self.current_poi,
            "beliefs": {
                str(pid): [round(x, 12) for x in b.dims] + [round(b.sigma, 12), b.visit_count]
                for pid, b in sorted(self.spatial.beliefs.items())
            },
            "goals": self.goals.to_dict(),
            "rng": _encode_rng_state(self.rng.bit_generator.state),
            "temporal_len": len(self.temporal.nodes),
        }


def _encode_rng_state(state: dict) -> dict:
    """JSON-safe copy of a PCG64 bit-generator state."""
    return {
        "bit_generator": state["bit_generator"],
        "state": {k: str(v) for k, v in state["state"].items()},
        "has_uint32": state["has_uint32"],
        "uinteger": state["uinteger"],
    }


def _decode_rng_state(data: dict) -> dict:
    return {
        "bit_generator": data["bit_generator"],
        "state": {k: int(v) for k, v in data["state"].items()},
        "has_uint32": data["has_uint32"],
        "uinteger": data["uinteger"],
    }
