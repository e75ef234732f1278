"""Deterministic stub backend: documented rule tables, one per oracle kind.

Every answer is a pure function of (request payload, run seed).  Randomness
comes from a hash-derived generator, so identical requests always get
identical responses, across processes and thread schedules.
"""

from __future__ import annotations

import hashlib
import random

from citysim.oracle.types import OracleRequest

NEED_NAMES = ("hunger", "energy", "safety", "social")

# Activity tags -> need deltas applied when the activity completes.
EFFECT_TABLE = {
    "eat": {"hunger": 0.6},
    "sleep": {"energy": 0.9},
    "social": {"social": 0.5},
    "rest": {"energy": 0.3},
}
COMPLETION_SAFETY_BONUS = 0.1

# Per-category belief-dimension offsets (price, atmosphere, satisfaction,
# convenience), each within +/-0.1 of the popularity base.
CATEGORY_OFFSETS = {
    "cafe": (0.02, 0.06, 0.02, 0.04),
    "park": (0.10, 0.08, 0.02, -0.06),
    "office": (0.0, -0.06, -0.04, 0.02),
    "school": (0.0, -0.02, 0.0, 0.0),
    "restaurant": (-0.06, 0.04, 0.06, 0.02),
    "shop": (-0.02, 0.0, 0.02, 0.04),
    "transit": (0.0, -0.08, -0.02, 0.10),
    "entertainment": (-0.08, 0.10, 0.08, 0.0),
    "home": (0.10, 0.04, 0.06, 0.08),
    "hospital": (-0.04, -0.08, 0.0, 0.02),
}

# Mandatory-day templates per occupation: (start, duration, content, tag).
# Work and school blocks apply on weekdays only.
MANDATORY_TEMPLATES = {
    "office_worker": {
        "sleep": [(0, 420), (1380, 60)],
        "work": [(540, 540, "work at the office")],
    },
    "student": {
        "sleep": [(0, 420), (1380, 60)],
        "work": [(510, 420, "classes at school")],
    },
    "nurse_shift": {
        "sleep": [(480, 420)],
        "work": [(0, 360, "hospital shift"), (1260, 180, "hospital shift")],
        "work_daily": True,
    },
    "freelance": {"sleep": [(0, 480)], "work": []},
    "retired": {"sleep": [(0, 390), (1350, 90)], "work": []},
    "homemaker": {"sleep": [(0, 420), (1380, 60)], "work": []},
    "unemployed": {"sleep": [(0, 540)], "work": []},
}

# Medium-priority tasks tried in order; a task fires when the empty block
# starts inside its window and the name is not already on the day plan.
MEDIUM_RULES = (
    ("breakfast", "eat", 30, 360, 570),
    ("morning routine", "hygiene", 15, 360, 600),
    ("errands and chores", "errand", 45, 570, 690),
    ("lunch", "eat", 45, 690, 810),
    ("dinner", "eat", 45, 1050, 1230),
)

# Hobby tag -> leisure outing (description, tag, category, duration).
HOBBY_OUTINGS = {
    "reading": ("read at a cafe", "leisure", "cafe", 90),
    "sports": ("exercise at the park", "leisure", "park", 60),
    "gaming": ("play games at an arcade", "leisure", "entertainment", 90),
    "cooking": ("shop for groceries", "leisure", "shop", 45),
    "music": ("catch live music", "leisure", "entertainment", 120),
    "gardening": ("walk in the park", "leisure", "park", 60),
    "photography": ("photo walk around the park", "leisure", "park", 90),
    "shopping": ("browse the shops", "leisure", "shop", 60),
    "crafts": ("crafts at home", "rest", None, 90),
    "cinema": ("catch a movie", "leisure", "entertainment", 120),
}

NEED_SERVING_CANDIDATES = {
    "hunger": ("go out for a meal", "eat", "restaurant", 45),
    "energy": ("take a nap at home", "rest", None, 60),
    "safety": ("quiet time at home", "rest", None, 45),
    "social": ("catch up with people nearby", "social", "cafe", 60),
}

# Imagined post-activity need deltas used when scoring leisure candidates.
IMAGINED_DELTAS = {
    "eat": {"hunger": 0.6, "safety": 0.1},
    "rest": {"energy": 0.3, "safety": 0.1},
    "social": {"social": 0.5, "safety": 0.1},
    "leisure": {"social": 0.15, "energy": -0.05, "safety": 0.1},
}

GOAL_TAGS_BY_TAG = {"eat": ["food"], "rest": ["home", "frugal"], "social": ["social"], "leisure": ["hobby"]}

# Intention keywords -> (categories, max radius m); first match wins.
INTENTION_KEYWORDS = (
    (("coffee",), ["cafe"], 1500.0),
    (("meal", "eat", "lunch", "dinner", "breakfast", "bite", "food"), ["restaurant", "cafe"], 1500.0),
    (("exercise", "walk", "park", "photo"), ["park"], 2000.0),
    (("shop", "groceries", "browse", "errand"), ["shop"], 2000.0),
    (("movie", "music", "games", "arcade"), ["entertainment"], 3000.0),
    (("read",), ["cafe"], 1500.0),
    (("people", "friends", "catch up"), ["cafe", "park"], 1500.0),
    (("explore",), ["entertainment", "park", "cafe"], 4000.0),
    (("hospital", "doctor"), ["hospital"], 5000.0),
)
INTENTION_FALLBACK = (["entertainment"], 2000.0)

VEHICLE_SPEEDS_KMH = {"walk": 5.0, "bicycle": 15.0, "car": 30.0, "bus": 20.0, "train": 40.0}

GOAL_TEMPLATES = {
    "financial_stress": (
        ("plan cheaper meals at home this month", ["frugal", "home"]),
        ("build an emergency fund", ["frugal"]),
    ),
    "social_isolation": (
        ("reach out to a friend this week", ["social"]),
        ("grow a steadier social circle", ["social"]),
    ),
}


class StubBackend:
    """Rule-table oracle; see module docstring for determinism contract."""

    name = "stub"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _rng(self, *parts) -> random.Random:
        digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))

    def handle(self, request: OracleRequest) -> dict:
        handler = getattr(self, f"_kind_{request.kind}")
        return handler(request.context)

    # -- needs ------------------------------------------------------------

    def _kind_init_needs(self, ctx: dict) -> dict:
        rng = self._rng(self.seed, "init_needs", ctx["agent_id"], ctx["day"])
        scores = {n: round(0.6 + 0.4 * rng.random(), 4) for n in NEED_NAMES}
        return {"scores": scores}

    def _kind_need_effects(self, ctx: dict) -> dict:
        deltas = dict(EFFECT_TABLE.get(ctx.get("tag", ""), {}))
        if ctx.get("completed", True):
            deltas["safety"] = deltas.get("safety", 0.0) + COMPLETION_SAFETY_BONUS
        return {"deltas": deltas}

    # -- beliefs ----------------------------------------------------------

    def _kind_appraise_visit(self, ctx: dict) -> dict:
        poi = ctx["poi"]
        # Jitter keyed on (agent, poi) only: repeat visits appraise alike.
        rng = self._rng(self.seed, "appraise", ctx["agent_id"], poi["id"])
        jitter = rng.uniform(-0.1, 0.1)
        base = poi["popularity"] + jitter / 2.0
        offsets = CATEGORY_OFFSETS.get(poi["category"], (0.0, 0.0, 0.0, 0.0))
        dims = ("price", "atmosphere", "satisfaction", "convenience")
        observation = {
            d: round(min(1.0, max(0.0, base + off)), 4) for d, off in zip(dims, offsets)
        }
        reasoning = f"{poi['name']} felt about as good as its reputation suggests"
        return {"observation": observation, "reasoning": reasoning}

    # -- planning ---------------------------------------------------------

    def _kind_plan_mandatory(self, ctx: dict) -> dict:
        template = MANDATORY_TEMPLATES[ctx["occupation"]]
        habits = ctx.get("habits", [])
        shift = -30 if "early_riser" in habits else 30 if "night_owl" in habits else 0
        blocks = []
        for entry in template["sleep"]:
            start, duration = entry[0], entry[1]
            if start == 0 and duration + shift >= 60:
                duration += shift  # habit nudges the wake-up time
            blocks.append({"start": start, "duration": duration, "content": "sleep", "tag": "sleep"})
        if ctx["is_weekday"] or template.get("work_daily"):
            for start, duration, content in template["work"]:
                blocks.append({"start": start, "duration": duration, "content": content, "tag": "work"})
        return {"blocks": blocks}

    def _kind_fill_medium(self, ctx: dict) -> dict:
        block = ctx["block"]
        placed = set(ctx.get("placed", []))
        for name, tag, duration, lo, hi in MEDIUM_RULES:
            if name in placed:
                continue
            if lo <= block["start"] < hi and block["duration"] >= 5:
                return {"task": {"name": name, "duration": min(duration, block["duration"]), "tag": tag}}
        return {"task": None}

    def _kind_leisure_candidates(self, ctx: dict) -> dict:
        block = ctx["block"]
        needs = ctx["needs"]
        rng = self._rng(self.seed, "leisure", ctx["agent_id"], block["start"], ctx["day"])
        lowest = min(NEED_NAMES, key=lambda n: (needs[n], NEED_NAMES.index(n)))
        specs = [NEED_SERVING_CANDIDATES[lowest]]
        hobbies = ctx.get("hobbies") or ["reading"]
        hobby = hobbies[rng.randrange(len(hobbies))]
        specs.append(HOBBY_OUTINGS.get(hobby, HOBBY_OUTINGS["reading"]))
        specs.append(("relax at home", "rest", None, 60))
        candidates = []
        for description, tag, category, duration in specs:
            deltas = IMAGINED_DELTAS[tag]
            imagined = {
                n: round(min(1.0, max(0.0, needs[n] + deltas.get(n, 0.0))), 4)
                for n in NEED_NAMES
            }
            candidates.append(
                {
                    "description": description,
                    "duration": min(duration, block["duration"]),
                    "imagined": imagined,
                    "category": category,
                    "tag": tag,
                    "goal_tags": GOAL_TAGS_BY_TAG[tag],
                }
            )
        return {"candidates": candidates}

    # -- mobility ---------------------------------------------------------

    def _kind_select_area(self, ctx: dict) -> dict:
        ranked = ctx["ranked_area_ids"]
        current = ctx["current_area_id"]
        if "explore" in ctx["intention"].lower():
            for area_id in ranked:
                if area_id != current:
                    return {"area_id": area_id}
        return {"area_id": current}

    def _kind_extract_intention(self, ctx: dict) -> dict:
        hint = ctx.get("category_hint")
        if hint:
            return {"categories": [hint], "max_radius_m": 2000.0}
        activity = ctx["activity"].lower()
        for keywords, categories, radius in INTENTION_KEYWORDS:
            if any(word in activity for word in keywords):
                return {"categories": list(categories), "max_radius_m": radius}
        categories, radius = INTENTION_FALLBACK
        return {"categories": list(categories), "max_radius_m": radius}

    def _kind_select_vehicle(self, ctx: dict) -> dict:
        d = float(ctx["distance_m"])
        available = list(ctx["available"])
        if d < 800 and "walk" in available:
            vehicle = "walk"
        elif d < 3000 and ctx["weather"] != "rain" and "bicycle" in available:
            vehicle = "bicycle"
        elif "train" in available:
            vehicle = "train"
        elif "car" in available:
            vehicle = "car"
        else:
            vehicle = "bus" if "bus" in available else available[0]
        justification = f"chose {vehicle} for a {d / 1000.0:.1f} km trip in {ctx['weather']}"
        return {"vehicle": vehicle, "justification": justification}

    # -- perception / dispatch --------------------------------------------

    def _kind_dispatch(self, ctx: dict) -> dict:
        dominant = ctx.get("dominant")
        if dominant == "hunger":
            return {
                "module": "place_selection",
                "explanation": "hunger is below threshold; find food",
                "parameters": {"categories": ["restaurant", "cafe"], "serve": "hunger", "activity": "go get food"},
            }
        if dominant == "energy":
            return {
                "module": "place_selection",
                "explanation": "energy is depleted; go rest at home",
                "parameters": {"categories": ["home"], "serve": "energy", "activity": "go home and rest"},
            }
        if dominant == "safety":
            return {
                "module": "place_selection",
                "explanation": "feeling unsettled; head home",
                "parameters": {"categories": ["home"], "serve": "safety", "activity": "head home"},
            }
        if dominant == "social":
            return {
                "module": "social",
                "explanation": "social need is below threshold; seek company",
                "parameters": {"serve": "social"},
            }
        if ctx.get("at_empty_leisure_start"):
            return {"module": "planning", "explanation": "free block ahead; plan it", "parameters": {}}
        return {"module": "none", "explanation": "keep following the plan", "parameters": {}}

    # -- social -----------------------------------------------------------

    def _kind_converse(self, ctx: dict) -> dict:
        rng = self._rng(self.seed, "converse", ctx["initiator"], ctx["partner"], ctx["tick"])
        mean = (ctx["edge_u_scalar"] + ctx["edge_v_scalar"]) / 2.0
        noisy = mean + rng.uniform(-0.1, 0.1)
        if noisy >= 0.6:
            outcome = "positive"
        elif noisy <= 0.2:
            outcome = "negative"
        else:
            outcome = "neutral"
        mode = ctx["mode"].replace("_", "-")
        transcript = [
            f"{ctx['initiator_name']}: got a minute to catch up?",
            f"{ctx['partner_name']}: sure, a {mode} chat sounds good.",
        ]
        return {"outcome": outcome, "transcript": transcript}

    # -- reflection / goals -----------------------------------------------

    def _kind_reflect(self, ctx: dict) -> dict:
        counts: dict[str, list[int]] = {}
        for node in ctx["nodes"]:
            counts.setdefault(node["key"], []).append(int(node["id"]))
        ranked = sorted(counts.items(), key=lambda kv: (-len(kv[1]), kv[0]))
        insights = [
            {
                "text": f"recurring focus on {key} ({len(ids)} moments today)",
                "evidence": ids[:8],
            }
            for key, ids in ranked[:5]
        ]
        return {"insights": insights}

    def _kind_revise_goals(self, ctx: dict) -> dict:
        triggers = ctx["triggers"]
        short_goals, long_goals, tags = [], [], []
        for name in ("financial_stress", "social_isolation"):
            if triggers.get(name):
                short, long = GOAL_TEMPLATES[name]
                short_goals.append(short[0])
                long_goals.append(long[0])
                tags.extend(short[1] + long[1])
        if triggers.get("life_event"):
            event = ctx.get("life_event_tag", "a life change")
            short_goals.append(f"adjust the daily routine after {event}")
            long_goals.append(f"find stable footing after {event}")
            tags.append("home")
        if triggers.get("monthly_due") and not short_goals:
            if ctx.get("interest", 0.0) < 0.4:
                short_goals.append("try two new places nearby")
                tags.append("explore")
            else:
                hobby = (ctx.get("hobbies") or ["reading"])[0]
                short_goals.append(f"keep up the {hobby} routine")
                tags.append("hobby")
            long_goals.append("stay healthy and balanced")
            tags.append("health")
        seen = set()
        tags = [t for t in tags if not (t in seen or seen.add(t))]
        return {"short_goals": short_goals, "long_goals": long_goals, "tags": tags}
