"""Agent profiles and the seeded synthetic population generator.

Profiles carry demographics, spatial anchors (home, work/school), Big Five
facets on a 1-3 scale, and habit/hobby tags.  The generator samples from a
configurable distribution spec so populations are reproducible and the
marginals are under the caller's control rather than hardcoded.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from citysim.errors import PersonaValidationError, PopulationError
from citysim.world import CityMap, Poi

OCCUPATIONS = (
    "office_worker",
    "student",
    "nurse_shift",
    "freelance",
    "retired",
    "homemaker",
    "unemployed",
)
GENDERS = ("female", "male", "nonbinary")
EDUCATION_LEVELS = ("primary", "high_school", "vocational", "bachelor", "graduate")
HOUSEHOLDS = ("single", "couple", "family_kids", "shared", "multi_gen")
LIFE_STAGES = ("child", "student", "young_adult", "adult", "senior")
BIG_FIVE = ("openness", "conscientiousness", "extraversion", "agreeableness", "neuroticism")

HABIT_TAGS = (
    "early_riser",
    "night_owl",
    "gym_regular",
    "eats_out",
    "cooks_home",
    "long_commuter",
    "social_butterfly",
    "homebody",
    "weekend_traveler",
    "coffee_lover",
    "frugal",
    "big_spender",
)
HOBBY_TAGS = (
    "reading",
    "sports",
    "gaming",
    "cooking",
    "music",
    "gardening",
    "photography",
    "shopping",
    "crafts",
    "cinema",
)

# Occupations that must carry a work/school anchor.
ANCHORED_OCCUPATIONS = {"office_worker": "office", "student": "school", "nurse_shift": "hospital"}

_FIRST_NAMES = (
    "Aki", "Ben", "Chai", "Dana", "Emi", "Farid", "Gus", "Hana", "Iris", "Jun",
    "Kai", "Lena", "Mio", "Noor", "Omar", "Pia", "Quinn", "Rei", "Sana", "Theo",
)
_SURNAMES = (
    "Abe", "Brook", "Chen", "Diaz", "Endo", "Fujii", "Grant", "Hoshi", "Ito", "Jones",
    "Kato", "Lund", "Mori", "Nakai", "Oda", "Park", "Quist", "Rossi", "Sato", "Tanai",
)


@dataclass(slots=True)
class Persona:
    agent_id: int
    name: str
    age: int
    gender: str
    occupation: str
    income: float  # currency per month
    expenses: float
    education: str
    household: str
    life_stage: str
    hobbies: list[str]
    big_five: dict[str, int]
    habits: list[str]
    home_poi: int
    work_poi: int | None = None
    dominant_need_text: str = ""

    def validate(self, city: CityMap | None = None) -> None:
        if not (0 <= self.age <= 110):
            raise PersonaValidationError(f"agent {self.agent_id}: age {self.age} outside [0, 110]")
        if self.income < 0 or self.expenses < 0:
            raise PersonaValidationError(f"agent {self.agent_id}: negative income or expenses")
        if self.occupation not in OCCUPATIONS:
            raise PersonaValidationError(
                f"agent {self.agent_id}: unknown occupation {self.occupation!r}"
            )
        if set(self.big_five) != set(BIG_FIVE):
            raise PersonaValidationError(f"agent {self.agent_id}: big_five facets incomplete")
        for facet, score in self.big_five.items():
            if score not in (1, 2, 3):
                raise PersonaValidationError(
                    f"agent {self.agent_id}: big_five {facet}={score} outside {{1,2,3}}"
                )
        anchor = ANCHORED_OCCUPATIONS.get(self.occupation)
        if anchor is not None and self.work_poi is None:
            raise PersonaValidationError(
                f"agent {self.agent_id}: occupation {self.occupation} requires a work anchor"
            )
        if city is not None:
            home = city.poi_by_id.get(self.home_poi)
            if home is None or home.category != "home":
                raise PersonaValidationError(
                    f"agent {self.agent_id}: home_poi {self.home_poi} is not a home POI"
                )
            if self.work_poi is not None and self.work_poi not in city.poi_by_id:
                raise PersonaValidationError(
                    f"agent {self.agent_id}: work_poi {self.work_poi} not in city"
                )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Persona":
        try:
            return cls(
                agent_id=int(data["agent_id"]),
                name=str(data["name"]),
                age=int(data["age"]),
                gender=str(data["gender"]),
                occupation=str(data["occupation"]),
                income=float(data["income"]),
                expenses=float(data["expenses"]),
                education=str(data["education"]),
                household=str(data["household"]),
                life_stage=str(data["life_stage"]),
                hobbies=[str(h) for h in data["hobbies"]],
                big_five={str(k): int(v) for k, v in data["big_five"].items()},
                habits=[str(h) for h in data["habits"]],
                home_poi=int(data["home_poi"]),
                work_poi=None if data.get("work_poi") is None else int(data["work_poi"]),
                dominant_need_text=str(data.get("dominant_need_text", "")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise PersonaValidationError(f"malformed persona record: {exc}") from exc


@dataclass
class PopulationSpec:
    """Marginal distributions driving the synthetic population.

    age_bands: (low, high, weight) triples; band counts are allocated by
    largest remainder so requested shares are hit exactly.
    occupation_rules: first matching (age_low, age_high) row supplies the
    occupation weights for an agent of that age.
    """

    age_bands: list[tuple[int, int, float]] = field(
        default_factory=lambda: [
            (6, 17, 0.12),
            (18, 24, 0.12),
            (25, 44, 0.34),
            (45, 64, 0.26),
            (65, 90, 0.16),
        ]
    )
    occupation_rules: list[tuple[int, int, dict[str, float]]] = field(
        default_factory=lambda: [
            (0, 21, {"student": 1.0}),
            (22, 64, {
                "office_worker": 0.56,
                "nurse_shift": 0.08,
                "freelance": 0.14,
                "homemaker": 0.12,
                "unemployed": 0.10,
            }),
            (65, 110, {"retired": 0.85, "freelance": 0.05, "homemaker": 0.10}),
        ]
    )
    income_lognorm_mu: float = 12.6  # log of monthly income, currency units
    income_lognorm_sigma: float = 0.45
    income_occupation_scale: dict[str, float] = field(
        default_factory=lambda: {
            "office_worker": 1.0,
            "nurse_shift": 0.95,
            "freelance": 0.85,
            "student": 0.15,
            "retired": 0.55,
            "homemaker": 0.25,
            "unemployed": 0.20,
        }
    )
    expense_ratio_mean: float = 0.80
    expense_ratio_sd: float = 0.20
    gender_weights: dict[str, float] = field(
        default_factory=lambda: {"female": 0.49, "male": 0.49, "nonbinary": 0.02}
    )
    household_weights: dict[str, float] = field(
        default_factory=lambda: {
            "single": 0.35,
            "couple": 0.25,
            "family_kids": 0.25,
            "shared": 0.08,
            "multi_gen": 0.07,
        }
    )
    hobbies_per_agent: tuple[int, int] = (1, 3)
    habits_per_agent: tuple[int, int] = (1, 3)
    car_income_threshold: float = 280_000.0

    def to_dict(self) -> dict:
        return {
            "age_bands": [list(b) for b in self.age_bands],
            "occupation_rules": [[lo, hi, dict(w)] for lo, hi, w in self.occupation_rules],
            "income_lognorm_mu": self.income_lognorm_mu,
            "income_lognorm_sigma": self.income_lognorm_sigma,
            "income_occupation_scale": dict(self.income_occupation_scale),
            "expense_ratio_mean": self.expense_ratio_mean,
            "expense_ratio_sd": self.expense_ratio_sd,
            "gender_weights": dict(self.gender_weights),
            "household_weights": dict(self.household_weights),
            "hobbies_per_agent": list(self.hobbies_per_agent),
            "habits_per_agent": list(self.habits_per_agent),
            "car_income_threshold": self.car_income_threshold,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PopulationSpec":
        spec = cls()
        if "age_bands" in data:
            spec.age_bands = [(int(a), int(b), float(w)) for a, b, w in data["age_bands"]]
        if "occupation_rules" in data:
            spec.occupation_rules = [
                (int(lo), int(hi), {str(k): float(v) for k, v in w.items()})
                for lo, hi, w in data["occupation_rules"]
            ]
        for key in (
            "income_lognorm_mu",
            "income_lognorm_sigma",
            "expense_ratio_mean",
            "expense_ratio_sd",
            "car_income_threshold",
        ):
            if key in data:
                setattr(spec, key, float(data[key]))
        for key in ("income_occupation_scale", "gender_weights", "household_weights"):
            if key in data:
                setattr(spec, key, {str(k): float(v) for k, v in data[key].items()})
        for key in ("hobbies_per_agent", "habits_per_agent"):
            if key in data:
                setattr(spec, key, (int(data[key][0]), int(data[key][1])))
        return spec

    @classmethod
    def from_json(cls, path) -> "PopulationSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _quota_counts(n: int, weights: list[float]) -> list[int]:
    """Largest-remainder allocation of n slots over weights."""
    total = sum(weights)
    raw = [n * w / total for w in weights]
    counts = [int(x) for x in raw]
    remainders = sorted(
        range(len(raw)), key=lambda i: (raw[i] - counts[i], -i), reverse=True
    )
    short = n - sum(counts)
    for i in remainders[:short]:
        counts[i] += 1
    return counts


def _weighted_choice(rng: np.random.Generator, table: dict[str, float]) -> str:
    keys = sorted(table)
    probs = np.array([table[k] for k in keys], dtype=float)
    probs /= probs.sum()
    return keys[int(rng.choice(len(keys), p=probs))]


def generate_population(
    n: int,
    city: CityMap,
    seed: int,
    spec: PopulationSpec | None = None,
) -> list[Persona]:
    """Sample n personas from the distribution spec, anchored to the city.

    Deterministic: identical (n, seed, spec, city) yields identical output.
    Households of size > 1 share a home POI so the social network can seed
    household edges.  Raises PopulationError when the city lacks a category
    any sampled occupation needs.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    spec = spec or PopulationSpec()
    if n == 0:
        return []

    homes = city.pois_of_category("home")
    missing = [] if homes else ["home"]
    rng = np.random.default_rng(seed)

    band_counts = _quota_counts(n, [w for _, _, w in spec.age_bands])
    ages: list[int] = []
    for (lo, hi, _), count in zip(spec.age_bands, band_counts):
        ages.extend(int(a) for a in rng.integers(lo, hi + 1, size=count))
    rng.shuffle(ages)

    personas: list[Persona] = []
    for agent_id in range(n):
        age = ages[agent_id]
        occ_table = None
        for lo, hi, table in spec.occupation_rules:
            if lo <= age <= hi:
                occ_table = table
                break
        if occ_table is None:
            occ_table = {"unemployed": 1.0}
        occupation = _weighted_choice(rng, occ_table)

        anchor_cat = ANCHORED_OCCUPATIONS.get(occupation)
        work_poi: Poi | None = None
        if anchor_cat is not None:
            pool = city.pois_of_category(anchor_cat)
            if not pool:
                if anchor_cat not in missing:
                    missing.append(anchor_cat)
            else:
                work_poi = pool[int(rng.integers(len(pool)))]
        elif occupation == "freelance":
            pool = city.pois_of_category("office")
            work_poi = pool[int(rng.integers(len(pool)))] if pool else None

        scale = spec.income_occupation_scale.get(occupation, 1.0)
        income = float(
            np.round(scale * np.exp(rng.normal(spec.income_lognorm_mu, spec.income_lognorm_sigma)), 2)
        )
        ratio = float(np.clip(rng.normal(spec.expense_ratio_mean, spec.expense_ratio_sd), 0.3, 1.6))
        expenses = float(np.round(income * ratio, 2))

        n_hobbies = int(rng.integers(spec.hobbies_per_agent[0], spec.hobbies_per_agent[1] + 1))
        hobbies = sorted(
            str(h) for h in rng.choice(HOBBY_TAGS, size=n_hobbies, replace=False)
        )
        n_habits = int(rng.integers(spec.habits_per_agent[0], spec.habits_per_agent[1] + 1))
        habits = sorted(
            str(h) for h in rng.choice(HABIT_TAGS, size=n_habits, replace=False)
        )

        if age < 13:
            life_stage = "child"
        elif occupation == "student":
            life_stage = "student"
        elif age < 35:
            life_stage = "young_adult"
        elif age < 65:
            life_stage = "adult"
        else:
            life_stage = "senior"

        if age < 18:
            education = "primary" if age < 15 else "high_school"
        else:
            education = str(
                rng.choice(EDUCATION_LEVELS[1:], p=[0.3, 0.2, 0.35, 0.15])
            )

        name = (
            f"{_FIRST_NAMES[int(rng.integers(len(_FIRST_NAMES)))]} "
            f"{_SURNAMES[int(rng.integers(len(_SURNAMES)))]}"
        )

        personas.append(
            Persona(
                agent_id=agent_id,
                name=name,
                age=age,
                gender=_weighted_choice(rng, spec.gender_weights),
                occupation=occupation,
                income=income,
                expenses=expenses,
                education=education,
                household=_weighted_choice(rng, spec.household_weights),
                life_stage=life_stage,
                hobbies=hobbies,
                big_five={facet: int(rng.integers(1, 4)) for facet in BIG_FIVE},
                habits=habits,
                home_poi=-1,
                work_poi=None if work_poi is None else work_poi.id,
            )
        )

    if missing:
        raise PopulationError(
            "city lacks required anchor categories: " + ", ".join(sorted(missing))
        )

    _assign_homes(personas, homes, rng)
    for persona in personas:
        persona.validate(city)
    return personas


_HOUSEHOLD_SIZES = {"single": 1, "couple": 2, "family_kids": 3, "shared": 2, "multi_gen": 4}


def _assign_homes(personas: list[Persona], homes: list[Poi], rng: np.random.Generator) -> None:
    """Group agents into households sharing one home POI each."""
    order = list(range(len(personas)))
    i = 0
    while i < len(order):
        head = personas[order[i]]
        size = min(_HOUSEHOLD_SIZES[head.household], len(order) - i)
        home = homes[int(rng.integers(len(homes)))]
        for j in range(i, i + size):
            member = personas[order[j]]
            member.home_poi = home.id
            member.household = head.household
        i += size


def save_personas(path, personas: list[Persona]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for persona in personas:
            fh.write(json.dumps(persona.to_dict(), sort_keys=True))
            fh.write("\n")


def load_personas(path) -> list[Persona]:
    personas = []
    with open(path, "r", encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                persona = Persona.from_dict(json.loads(line))
                persona.validate()
            except (json.JSONDecodeError, PersonaValidationError) as exc:
                raise PersonaValidationError(f"record {index}: {exc}") from exc
            personas.append(persona)
    return personas
