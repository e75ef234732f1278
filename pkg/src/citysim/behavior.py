"""Daily schedules, destination choice, and transport mode choice.

A day is a gap-free partition of [0, 1440) into 5-minute-granular blocks.
Mandatory blocks (sleep, work) are placed first, medium tasks (meals,
hygiene, errands) fill empty stretches recursively, and remaining empty
leisure blocks are decided at execution time by scoring oracle-generated
candidates.  Destinations come from a belief-weighted gravity model over
candidate POIs; distances enter in kilometers with a 0.01 km floor because
the exponent makes the weight unit-sensitive and would explode as D -> 0
when the belief is below neutral.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from citysim.cognition import NEED_NAMES
from citysim.errors import InvalidIntentionError, ScheduleError
from citysim.memory import BeliefVector
from citysim.oracle import Oracle, OracleError, OracleRequest
from citysim.world import CATEGORIES, Area, CityMap, Poi, distance, nearby_areas

logger = logging.getLogger(__name__)

MINUTES_PER_DAY = 1440
GRID = 5
EMPTY = ""
TIERS = ("mandatory", "medium", "leisure")

GRAVITY_GAMMA = 2.0
GRAVITY_EPSILON = 1e-3
MIN_DISTANCE_KM = 0.01

GOAL_ALIGNMENT_BONUS = 0.1
LEISURE_CANDIDATE_COUNT = 3

VEHICLE_SPEEDS_KMH = {"walk": 5.0, "bicycle": 15.0, "car": 30.0, "bus": 20.0, "train": 40.0}
ALL_VEHICLES = ("walk", "bicycle", "car", "bus", "train")

# Need -> inserted serve block (content, tag, duration minutes).
NEED_SERVE_BLOCKS = {
    "hunger": ("go get food", "eat", 45),
    "energy": ("go home and rest", "rest", 60),
    "safety": ("head home", "rest", 45),
    "social": ("meet someone", "social", 30),
}

# Activities that never require a trip; reaching intention extraction with
# one of these is a caller bug.
_NON_MOVEMENT_WORDS = ("sleep", "nap", "rest", "work", "class", "routine", "chores", "tidy", "crafts", "settle")


@dataclass(slots=True)
class TimeBlock:
    start: int
    duration: int
    content: str = EMPTY
    tier: str = "leisure"
    intention: str = ""
    tag: str = ""
    poi_id: int | None = None

    @property
    def end(self) -> int:
        return self.start + self.duration

    @property
    def is_empty(self) -> bool:
        return self.content == EMPTY

    def copy(self) -> "TimeBlock":
        return TimeBlock(
            self.start, self.duration, self.content, self.tier, self.intention, self.tag, self.poi_id
        )

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "duration": self.duration,
            "content": self.content,
            "tier": self.tier,
            "intention": self.intention,
            "tag": self.tag,
            "poi_id": self.poi_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TimeBlock":
        return cls(
            start=int(data["start"]),
            duration=int(data["duration"]),
            content=str(data["content"]),
            tier=str(data["tier"]),
            intention=str(data["intention"]),
            tag=str(data["tag"]),
            poi_id=None if data.get("poi_id") is None else int(data["poi_id"]),
        )


@dataclass(slots=True)
class DaySchedule:
    blocks: list[TimeBlock] = field(default_factory=list)

    def validate(self) -> None:
        if not self.blocks:
            raise ScheduleError("schedule has no blocks")
        cursor = 0
        for block in self.blocks:
            if block.start != cursor:
                raise ScheduleError(f"gap or overlap at minute {cursor} (block starts {block.start})")
            if block.duration < GRID or block.duration % GRID:
                raise ScheduleError(f"block at {block.start} has bad duration {block.duration}")
            if block.tier not in TIERS:
                raise ScheduleError(f"block at {block.start} has unknown tier {block.tier!r}")
            if block.tier in ("mandatory", "medium") and block.is_empty:
                raise ScheduleError(f"{block.tier} block at {block.start} has no content")
            cursor = block.end
        if cursor != MINUTES_PER_DAY:
            raise ScheduleError(f"schedule covers {cursor} minutes, not {MINUTES_PER_DAY}")

    def index_at(self, minute: int) -> int:
        for i, block in enumerate(self.blocks):
            if block.start <= minute < block.end:
                return i
        raise ScheduleError(f"minute {minute} outside the day")

    def block_at(self, minute: int) -> TimeBlock:
        return self.blocks[self.index_at(minute)]

    def copy(self) -> "DaySchedule":
        return DaySchedule([b.copy() for b in self.blocks])

    def to_dict(self) -> dict:
        return {"blocks": [b.to_dict() for b in self.blocks]}

    @classmethod
    def from_dict(cls, data: dict) -> "DaySchedule":
        return cls([TimeBlock.from_dict(b) for b in data["blocks"]])


@dataclass(slots=True)
class ActivityCandidate:
    description: str
    duration: int
    imagined: dict[str, float]
    category: str | None
    tag: str
    goal_tags: list[str]
    score: float = 0.0


@dataclass(slots=True)
class TripContext:
    distance_m: float
    minute_of_day: int
    month: int
    weather: str
    temperature_c: float
    persona_digest: dict
    available: list[str]


def snap_duration(minutes: int) -> int:
    """Round to the 5-minute grid, never below one grid step."""
    return max(GRID, int(round(minutes / GRID)) * GRID)


def plan_mandatory(persona, is_weekday: bool, oracle: Oracle) -> DaySchedule:
    """Place the day's fixed blocks and pad everything else with EMPTY leisure.

    Overlapping proposals are resolved by truncating the later block.
    """
    context = {
        "agent_id": persona.agent_id,
        "occupation": persona.occupation,
        "is_weekday": is_weekday,
        "habits": sorted(persona.habits),
        "age": persona.age,
    }
    try:
        response = oracle.call(OracleRequest(kind="plan_mandatory", context=context))
        proposed = response.payload["blocks"]
    except OracleError as exc:
        logger.warning("plan_mandatory oracle failure for agent %s: %s", persona.agent_id, exc)
        proposed = [{"start": 0, "duration": 420, "content": "sleep", "tag": "sleep"}]

    placed: list[TimeBlock] = []
    for raw in sorted(proposed, key=lambda b: (int(b["start"]), int(b["duration"]))):
        start = max(0, min(MINUTES_PER_DAY, int(raw["start"])))
        start = (start // GRID) * GRID
        duration = snap_duration(int(raw["duration"]))
        duration = min(duration, MINUTES_PER_DAY - start)
        if placed and start < placed[-1].end:
            start = placed[-1].end  # later block loses the overlap
            duration = min(duration, MINUTES_PER_DAY - start)
            logger.debug("mandatory overlap truncated for agent %s at %s", persona.agent_id, start)
        if duration < GRID:
            continue
        poi_id = persona.work_poi if raw["tag"] in ("work", "school") else persona.home_poi
        placed.append(
            TimeBlock(
                start=start,
                duration=duration,
                content=str(raw["content"]),
                tier="mandatory",
                tag=str(raw["tag"]),
                poi_id=poi_id,
            )
        )

    blocks: list[TimeBlock] = []
    cursor = 0
    for block in placed:
        if block.start > cursor:
            blocks.append(TimeBlock(start=cursor, duration=block.start - cursor))
        blocks.append(block)
        cursor = block.end
    if cursor < MINUTES_PER_DAY:
        blocks.append(TimeBlock(start=cursor, duration=MINUTES_PER_DAY - cursor))
    schedule = DaySchedule(blocks)
    schedule.validate()
    return schedule


def fill_medium(schedule: DaySchedule, persona, oracle: Oracle) -> DaySchedule:
    """Recursively fill EMPTY blocks with medium tasks until the oracle declines.

    Each accepted task splits its block into [task][EMPTY remainder]; a
    remainder shorter than one grid step is absorbed into the task.
    """
    placed_names = [b.content for b in schedule.blocks if b.tier == "medium"]
    i = 0
    while i < len(schedule.blocks):
        block = schedule.blocks[i]
        if not block.is_empty or block.tier != "leisure":
            i += 1
            continue
        context = {
            "agent_id": persona.agent_id,
            "block": {"start": block.start, "duration": block.duration},
            "placed": list(placed_names),
            "occupation": persona.occupation,
        }
        try:
            response = oracle.call(OracleRequest(kind="fill_medium", context=context))
        except OracleError as exc:
            logger.warning("fill_medium oracle failure for agent %s: %s", persona.agent_id, exc)
            i += 1
            continue
        task = response.payload["task"]
        if task is None:
            i += 1
            continue
        duration = snap_duration(int(task["duration"]))
        if duration > block.duration:
            logger.debug("medium task truncated to block for agent %s", persona.agent_id)
            duration = block.duration
        if block.duration - duration < GRID:
            duration = block.duration  # absorb the dangling remainder
        task_block = TimeBlock(
            start=block.start,
            duration=duration,
            content=str(task["name"]),
            tier="medium",
            tag=str(task["tag"]),
            poi_id=persona.home_poi,
        )
        placed_names.append(task_block.content)
        if duration == block.duration:
            schedule.blocks[i] = task_block
        else:
            remainder = TimeBlock(start=block.start + duration, duration=block.duration - duration)
            schedule.blocks[i : i + 1] = [task_block, remainder]
        i += 1  # continue on the remainder (now at index i)
    schedule.validate()
    return schedule


def score_candidate(candidate: ActivityCandidate, active_goal_tags: set[str]) -> float:
    base = sum(candidate.imagined[n] for n in NEED_NAMES) / len(NEED_NAMES)
    bonus = GOAL_ALIGNMENT_BONUS if set(candidate.goal_tags) & active_goal_tags else 0.0
    return base + bonus


def fill_leisure_block(block: TimeBlock, agent_context: dict, oracle: Oracle) -> ActivityCandidate:
    """Generate candidates for an empty leisure block and pick the best.

    Score = mean imagined need score plus a goal-alignment bonus; ties keep
    the first generated.  Oracle failure degrades to resting in place.
    """
    context = dict(agent_context)
    context["block"] = {"start": block.start, "duration": block.duration}
    try:
        response = oracle.call(OracleRequest(kind="leisure_candidates", context=context))
        raw_candidates = response.payload["candidates"][:LEISURE_CANDIDATE_COUNT]
    except OracleError as exc:
        logger.warning("leisure_candidates oracle failure: %s", exc)
        return ActivityCandidate(
            description="rest at current location",
            duration=block.duration,
            imagined={n: 0.5 for n in NEED_NAMES},
            category=None,
            tag="rest",
            goal_tags=[],
            score=0.5,
        )
    active_tags = set(agent_context.get("goal_tags", []))
    candidates = []
    for raw in raw_candidates:
        duration = min(snap_duration(int(raw["duration"])), block.duration)
        candidate = ActivityCandidate(
            description=str(raw["description"]),
            duration=duration,
            imagined={n: float(raw["imagined"][n]) for n in NEED_NAMES},
            category=raw["category"],
            tag=str(raw["tag"]),
            goal_tags=[str(t) for t in raw["goal_tags"]],
        )
        candidate.score = score_candidate(candidate, active_tags)
        candidates.append(candidate)
    best = candidates[0]
    for candidate in candidates[1:]:
        if candidate.score > best.score:
            best = candidate
    return best


def select_area(position: tuple[float, float], current_area_id: int, intention: str, city: CityMap, oracle: Oracle) -> Area:
    """Stay local or move to one of the top-ranked nearby areas.

    An oracle answer outside the offered set falls back to the current area.
    """
    ranked = nearby_areas(position, city)
    ranked_ids = [a.id for a in ranked]
    offered = set(ranked_ids) | {current_area_id}
    context = {
        "intention": intention,
        "current_area_id": current_area_id,
        "ranked_area_ids": ranked_ids,
    }
    try:
        response = oracle.call(OracleRequest(kind="select_area", context=context))
        chosen = int(response.payload["area_id"])
    except OracleError as exc:
        logger.warning("select_area oracle failure: %s", exc)
        chosen = current_area_id
    if chosen not in offered:
        chosen = current_area_id
    return city.area_by_id[chosen]


def extract_intention(activity: str, context: dict, oracle: Oracle) -> tuple[set[str], float]:
    """Map an activity to required POI categories and a search radius.

    Raises InvalidIntentionError for activities that never require a trip;
    unmappable activities get the documented default (entertainment, 2 km).
    """
    if not activity:
        raise InvalidIntentionError("empty activity text")
    lowered = activity.lower()
    if context.get("category_hint") is None and any(w in lowered for w in _NON_MOVEMENT_WORDS):
        raise InvalidIntentionError(f"non-movement activity {activity!r} should not reach place selection")
    oracle_context = {"activity": activity, "category_hint": context.get("category_hint")}
    try:
        response = oracle.call(OracleRequest(kind="extract_intention", context=oracle_context))
        categories = {c for c in response.payload["categories"] if c in CATEGORIES}
        radius = float(response.payload["max_radius_m"])
    except OracleError as exc:
        logger.warning("extract_intention oracle failure: %s", exc)
        categories, radius = set(), 0.0
    if not categories or radius <= 0:
        categories, radius = {"entertainment"}, 2000.0
    return categories, radius


def belief_attractiveness(belief: BeliefVector) -> float:
    """Scalar attractiveness: unweighted mean of the four belief dimensions."""
    return sum(belief.dims) / len(belief.dims)


def gravity_weights(origin: tuple[float, float], candidates: list[Poi], beliefs: list[BeliefVector]) -> np.ndarray:
    """Normalized selection probabilities for the belief-weighted gravity rule."""
    if not candidates:
        raise ValueError("gravity_weights needs at least one candidate")
    if len(candidates) != len(beliefs):
        raise ValueError("one belief per candidate required")
    weights = np.empty(len(candidates))
    for i, (poi, belief) in enumerate(zip(candidates, beliefs)):
        b = belief_attractiveness(belief)
        d_km = max(distance(origin, poi.position) / 1000.0, MIN_DISTANCE_KM)
        weights[i] = (b + GRAVITY_EPSILON) / d_km ** (1.0 + GRAVITY_GAMMA * (b - 0.5))
    return weights / weights.sum()


def gravity_select(
    origin: tuple[float, float],
    candidates: list[Poi],
    beliefs: list[BeliefVector],
    rng: np.random.Generator,
) -> tuple[Poi, np.ndarray]:
    """Sample a destination; returns (POI, full probability vector)."""
    probs = gravity_weights(origin, candidates, beliefs)
    index = int(rng.choice(len(candidates), p=probs))
    return candidates[index], probs


def _fallback_vehicle(trip: TripContext) -> str:
    d = trip.distance_m
    if d < 800 and "walk" in trip.available:
        return "walk"
    if d < 3000 and trip.weather != "rain" and "bicycle" in trip.available:
        return "bicycle"
    for mode in ("train", "car", "bus"):
        if mode in trip.available:
            return mode
    return trip.available[0]


def travel_minutes(distance_m: float, vehicle: str) -> int:
    """Door-to-door minutes at mode speed, rounded up to whole ticks."""
    if distance_m <= 0:
        return 0
    speed_kmh = VEHICLE_SPEEDS_KMH[vehicle]
    minutes = (distance_m / 1000.0) / speed_kmh * 60.0
    return max(GRID, int(math.ceil(minutes / GRID)) * GRID)


def select_vehicle(trip: TripContext, oracle: Oracle) -> tuple[str, str]:
    """Pick a transport mode; unavailable picks are retried once, then the
    deterministic fallback rule decides."""
    context = {
        "distance_m": round(trip.distance_m, 1),
        "minute_of_day": trip.minute_of_day,
        "month": trip.month,
        "weather": trip.weather,
        "temperature_c": trip.temperature_c,
        "available": list(trip.available),
        "persona": trip.persona_digest,
    }
    for attempt in range(2):
        try:
            response = oracle.call(OracleRequest(kind="select_vehicle", context=context))
        except OracleError as exc:
            logger.warning("select_vehicle oracle failure: %s", exc)
            break
        vehicle = str(response.payload["vehicle"])
        if vehicle in trip.available:
            return vehicle, str(response.payload["justification"])
        context = dict(context)
        context["invalid_choice"] = vehicle
    vehicle = _fallback_vehicle(trip)
    return vehicle, f"fallback: {vehicle} fits a {trip.distance_m / 1000.0:.1f} km trip"


def interrupt_and_replan(
    schedule: DaySchedule,
    need: str,
    now: int,
    serve: tuple[str, str, int] | None = None,
) -> DaySchedule:
    """Truncate the current block at now and insert a need-serving block.

    Blocks inside the insertion window are consumed in time order (a later
    mandatory block keeps its start whenever the window ends before it).
    The result is still an exact partition of the day.
    """
    if now % GRID:
        raise ScheduleError(f"interruption time {now} off the {GRID}-minute grid")
    content, tag, duration = serve or NEED_SERVE_BLOCKS[need]
    duration = min(snap_duration(duration), MINUTES_PER_DAY - now)
    if duration < GRID:
        return schedule
    point = now + duration
    new_blocks: list[TimeBlock] = []
    for block in schedule.blocks:
        if block.end <= now:
            new_blocks.append(block)
        elif block.start < now:
            head = block.copy()
            head.duration = now - block.start
            new_blocks.append(head)
    new_blocks.append(TimeBlock(start=now, duration=duration, content=content, tier="medium", tag=tag))
    for block in schedule.blocks:
        if block.end <= point:
            continue
        if block.start < point:
            tail = block.copy()
            tail.start = point
            tail.duration = block.end - point
            new_blocks.append(tail)
        else:
            new_blocks.append(block)
    result = DaySchedule(new_blocks)
    result.validate()
    return result


def set_leisure_activity(schedule: DaySchedule, index: int, candidate: ActivityCandidate) -> int:
    """Write a chosen activity into an EMPTY leisure block at execution time.

    Splits off an EMPTY remainder when the activity is shorter than the
    block; returns the index of the activity block.
    """
    block = schedule.blocks[index]
    if not block.is_empty:
        raise ScheduleError(f"block at {block.start} already has content")
    duration = min(candidate.duration, block.duration)
    if block.duration - duration < GRID:
        duration = block.duration
    activity = TimeBlock(
        start=block.start,
        duration=duration,
        content=candidate.description,
        tier="leisure",
        intention=candidate.description,
        tag=candidate.tag,
    )
    if duration == block.duration:
        schedule.blocks[index] = activity
    else:
        remainder = TimeBlock(start=block.start + duration, duration=block.duration - duration)
        schedule.blocks[index : index + 1] = [activity, remainder]
    return index
