"""Needs dynamics, long-term goal triggers, and the perception dispatcher.

Four needs (hunger, energy, safety, social) decay continuously and are
replenished by activity outcomes.  A need whose score falls to or below its
threshold becomes dominant under the fixed priority hunger > safety >
energy > social and may interrupt the current plan.  Goal revision fires
monthly or on financial stress, social isolation, or injected life events.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from citysim.oracle import Oracle, OracleError, OracleRequest

logger = logging.getLogger(__name__)

NEED_NAMES = ("hunger", "energy", "safety", "social")
# Dominance resolution order; safety outranks energy despite equal storage order.
NEED_PRIORITY = ("hunger", "safety", "energy", "social")
NEED_THRESHOLDS = {"hunger": 0.3, "energy": 0.3, "safety": 0.2, "social": 0.2}
# Score lost per hour; chosen so hunger crosses its threshold about twice
# per waking day from a 0.9 start.
DEFAULT_DECAY_PER_HOUR = {"hunger": 0.06, "energy": 0.04, "safety": 0.01, "social": 0.02}

FALLBACK_NEED_SCORE = 0.8
FINANCIAL_STRESS_FACTOR = 0.9
ISOLATION_CONTACT_MIN = 3
ISOLATION_WINDOW_DAYS = 7
VISIT_WINDOW_DAYS = 30
GOAL_REVISION_PERIOD_DAYS = 30

DISPATCH_MODULES = ("planning", "social", "place_selection", "vehicle", "rest", "none")


@dataclass(slots=True)
class NeedsState:
    scores: dict[str, float] = field(default_factory=lambda: {n: FALLBACK_NEED_SCORE for n in NEED_NAMES})
    decay_per_hour: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_DECAY_PER_HOUR))
    thresholds: dict[str, float] = field(default_factory=lambda: dict(NEED_THRESHOLDS))

    def clamp(self) -> None:
        for name in NEED_NAMES:
            self.scores[name] = min(1.0, max(0.0, self.scores[name]))

    def to_dict(self) -> dict:
        return {
            "scores": dict(self.scores),
            "decay_per_hour": dict(self.decay_per_hour),
            "thresholds": dict(self.thresholds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NeedsState":
        return cls(
            scores=dict(data["scores"]),
            decay_per_hour=dict(data["decay_per_hour"]),
            thresholds=dict(data["thresholds"]),
        )


@dataclass(slots=True)
class GoalSet:
    short_goals: list[str] = field(default_factory=list)
    long_goals: list[str] = field(default_factory=list)
    tags: list[str] = field(default_factory=list)
    last_revision: int = -1  # -1: never revised
    pending_life_event: str | None = None

    def to_dict(self) -> dict:
        return {
            "short_goals": list(self.short_goals),
            "long_goals": list(self.long_goals),
            "tags": list(self.tags),
            "last_revision": self.last_revision,
            "pending_life_event": self.pending_life_event,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GoalSet":
        return cls(
            short_goals=list(data["short_goals"]),
            long_goals=list(data["long_goals"]),
            tags=list(data["tags"]),
            last_revision=int(data["last_revision"]),
            pending_life_event=data.get("pending_life_event"),
        )


@dataclass(slots=True)
class DispatchDecision:
    module_choice: str
    explanation: str
    parameters: dict


@dataclass(slots=True)
class TriggerReport:
    financial_stress: bool
    social_isolation: bool
    monthly_due: bool
    life_event: bool
    life_event_tag: str | None
    interest: float

    def any(self) -> bool:
        return self.financial_stress or self.social_isolation or self.monthly_due or self.life_event

    def to_dict(self) -> dict:
        return {
            "financial_stress": self.financial_stress,
            "social_isolation": self.social_isolation,
            "monthly_due": self.monthly_due,
            "life_event": self.life_event,
            "life_event_tag": self.life_event_tag,
            "interest": self.interest,
        }


def init_needs(persona, day_context: dict, oracle: Oracle) -> NeedsState:
    """Morning initialization; out-of-range oracle values are clamped.

    Oracle failure falls back to 0.8 across the board.
    """
    state = NeedsState()
    context = {
        "agent_id": persona.agent_id,
        "day": day_context["day"],
        "occupation": persona.occupation,
        "age": persona.age,
        "weather": day_context.get("weather", "clear"),
    }
    try:
        response = oracle.call(OracleRequest(kind="init_needs", context=context))
        state.scores = {n: float(response.payload["scores"][n]) for n in NEED_NAMES}
    except OracleError as exc:
        logger.warning("init_needs oracle failure for agent %s: %s", persona.agent_id, exc)
        state.scores = {n: FALLBACK_NEED_SCORE for n in NEED_NAMES}
    state.clamp()
    return state


def decay_needs(state: NeedsState, minutes: float) -> NeedsState:
    """Reduce each score by its hourly rate scaled to minutes, floored at 0."""
    if minutes < 0:
        raise ValueError("minutes must be >= 0")
    hours = minutes / 60.0
    for name in NEED_NAMES:
        state.scores[name] = max(0.0, state.scores[name] - state.decay_per_hour[name] * hours)
    return state


def dominant_need(state: NeedsState, persona=None) -> str | None:
    """Highest-priority need at or below its threshold, else None.

    Also mirrors the result into persona.dominant_need_text when given.
    """
    result = None
    for name in NEED_PRIORITY:
        if state.scores[name] <= state.thresholds[name]:
            result = name
            break
    if persona is not None:
        persona.dominant_need_text = result or ""
    return result


def apply_need_effects(state: NeedsState, outcome: dict, oracle: Oracle) -> NeedsState:
    """Ask the oracle for per-need deltas of a finished activity and apply them.

    outcome carries at least {agent_id, activity, tag, completed}.  Oracle
    failure leaves the state unchanged.
    """
    try:
        response = oracle.call(OracleRequest(kind="need_effects", context=outcome))
    except OracleError as exc:
        logger.warning("need_effects oracle failure: %s", exc)
        return state
    for name, delta in response.payload["deltas"].items():
        if name in state.scores:
            state.scores[name] += max(-1.0, min(1.0, float(delta)))
    state.clamp()
    return state


def need_fulfillment(day_log: list[dict[str, float]], thresholds: dict[str, float] | None = None) -> float:
    """Fraction of tick samples where every need strictly exceeds its threshold."""
    if not day_log:
        return 0.0
    thresholds = thresholds or NEED_THRESHOLDS
    qualifying = sum(
        1
        for sample in day_log
        if all(sample[name] > thresholds[name] for name in NEED_NAMES)
    )
    return qualifying / len(day_log)


def goal_triggers(
    persona,
    goals: GoalSet,
    contact_log: list[tuple[int, int]],
    visit_log: list[tuple[int, int]],
    satisfaction_by_poi: dict[int, float],
    day_index: int,
) -> TriggerReport:
    """Evaluate the goal-revision triggers at a day boundary.

    contact_log: (minute, partner_id) pairs; visit_log: (minute, poi_id)
    pairs; satisfaction_by_poi: current satisfaction belief per visited POI.
    """
    financial = persona.income < FINANCIAL_STRESS_FACTOR * persona.expenses
    window_start = (day_index + 1 - ISOLATION_WINDOW_DAYS) * 1440
    contacts = {partner for minute, partner in contact_log if minute >= window_start}
    isolation = len(contacts) < ISOLATION_CONTACT_MIN
    visit_start = (day_index + 1 - VISIT_WINDOW_DAYS) * 1440
    visited = sorted({poi for minute, poi in visit_log if minute >= visit_start})
    if visited:
        liked = sum(1 for poi in visited if satisfaction_by_poi.get(poi, 0.5) > 0.5)
        interest = liked / len(visited)
    else:
        interest = 0.0
    monthly = day_index - goals.last_revision >= GOAL_REVISION_PERIOD_DAYS
    life_event = goals.pending_life_event is not None
    return TriggerReport(
        financial_stress=financial,
        social_isolation=isolation,
        monthly_due=monthly,
        life_event=life_event,
        life_event_tag=goals.pending_life_event,
        interest=interest,
    )


def revise_goals(
    goals: GoalSet,
    persona,
    report: TriggerReport,
    day_index: int,
    oracle: Oracle,
) -> GoalSet:
    """Regenerate goals; requires at least one firing trigger.

    On oracle failure the goals are unchanged and the revision is NOT
    marked, so the trigger fires again next day.
    """
    if not report.any():
        raise ValueError("revise_goals called with no firing trigger")
    context = {
        "agent_id": persona.agent_id,
        "triggers": {
            "financial_stress": report.financial_stress,
            "social_isolation": report.social_isolation,
            "monthly_due": report.monthly_due,
            "life_event": report.life_event,
        },
        "life_event_tag": report.life_event_tag,
        "interest": round(report.interest, 4),
        "hobbies": list(persona.hobbies),
        "occupation": persona.occupation,
        "current_short": list(goals.short_goals),
        "current_long": list(goals.long_goals),
    }
    try:
        response = oracle.call(OracleRequest(kind="revise_goals", context=context))
    except OracleError as exc:
        logger.warning("revise_goals oracle failure for agent %s: %s", persona.agent_id, exc)
        return goals
    goals.short_goals = [str(g) for g in response.payload["short_goals"]]
    goals.long_goals = [str(g) for g in response.payload["long_goals"]]
    goals.tags = [str(t) for t in response.payload["tags"]]
    goals.last_revision = day_index
    goals.pending_life_event = None
    return goals


def dispatch(observation: dict, oracle: Oracle) -> DispatchDecision:
    """Pick the module that should react to the current observation.

    An oracle choice outside the registered module set is retried once with
    the registry echoed back, then mapped to none.  Never raises.
    """
    context = dict(observation)
    context["modules"] = list(DISPATCH_MODULES)
    for attempt in range(2):
        try:
            response = oracle.call(OracleRequest(kind="dispatch", context=context))
        except OracleError as exc:
            logger.warning("dispatch oracle failure: %s", exc)
            break
        module = str(response.payload["module"])
        if module in DISPATCH_MODULES:
            return DispatchDecision(
                module_choice=module,
                explanation=str(response.payload["explanation"]),
                parameters=dict(response.payload["parameters"]),
            )
        context = dict(context)
        context["invalid_choice"] = module
    return DispatchDecision(module_choice="none", explanation="fallback: follow the plan", parameters={})
