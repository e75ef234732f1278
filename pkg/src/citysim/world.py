"""Static city model, simulation clock, and ambient weather.

The city is a flat Euclidean plane: areas are groups of POIs, distances are
straight-line meters, and travel time is distance over mode speed.  The city
is immutable after load; the clock and weather are advanced only by the
engine at tick barriers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from citysim.errors import CityValidationError, InvalidIntentionError

CATEGORIES = (
    "cafe",
    "park",
    "office",
    "school",
    "restaurant",
    "shop",
    "transit",
    "entertainment",
    "home",
    "hospital",
)

FEATURE_DIM = 16

WEATHER_CONDITIONS = ("clear", "rain", "snow", "cloudy")
WEATHER_PERSIST = 0.7  # daily self-transition; remainder uniform over others

MINUTES_PER_DAY = 1440
DEFAULT_TICK_MINUTES = 5
DEFAULT_NEARBY_K = 10
DEFAULT_POI_CAP = 200


@dataclass(frozen=True, slots=True)
class Poi:
    id: int
    name: str
    category: str
    area_id: int
    position: tuple[float, float]
    popularity: float
    feature_vector: tuple[float, ...]


@dataclass(frozen=True, slots=True)
class Area:
    id: int
    name: str
    centroid: tuple[float, float]
    poi_ids: tuple[int, ...]


@dataclass(slots=True)
class SimClock:
    """Simulation time in minutes since epoch.  Day 0 is a Monday."""

    sim_time: int = 0
    tick_minutes: int = DEFAULT_TICK_MINUTES

    @property
    def day_index(self) -> int:
        return self.sim_time // MINUTES_PER_DAY

    @property
    def minute_of_day(self) -> int:
        return self.sim_time % MINUTES_PER_DAY

    @property
    def is_weekday(self) -> bool:
        return self.day_index % 7 < 5

    def advance(self) -> None:
        self.sim_time += self.tick_minutes


@dataclass(slots=True)
class WeatherState:
    condition: str = "clear"
    temperature_c: float = 18.0
    month: int = 4


# Monthly mean temperature (degC), temperate-city defaults.
_MONTH_TEMP = (4.0, 5.0, 9.0, 14.0, 19.0, 22.0, 26.0, 27.0, 23.0, 17.0, 11.0, 6.0)
_CONDITION_TEMP_OFFSET = {"clear": 2.0, "cloudy": 0.0, "rain": -2.0, "snow": -8.0}


class WeatherModel:
    """Seeded daily Markov chain over weather conditions."""

    def __init__(self, seed: int, start_month: int = 4):
        self._rng = np.random.default_rng(seed)
        self.start_month = start_month
        self.state = WeatherState(condition="clear", month=start_month)
        self.state.temperature_c = self._temperature("clear", start_month)

    def _temperature(self, condition: str, month: int) -> float:
        base = _MONTH_TEMP[month - 1] + _CONDITION_TEMP_OFFSET[condition]
        noise = float(self._rng.uniform(-3.0, 3.0))
        return max(-30.0, min(50.0, round(base + noise, 1)))

    def advance_day(self, day_index: int) -> WeatherState:
        current = self.state.condition
        if self._rng.random() < WEATHER_PERSIST:
            condition = current
        else:
            others = [c for c in WEATHER_CONDITIONS if c != current]
            condition = others[int(self._rng.integers(len(others)))]
        month = ((self.start_month - 1 + day_index // 30) % 12) + 1
        self.state = WeatherState(
            condition=condition,
            temperature_c=self._temperature(condition, month),
            month=month,
        )
        return self.state

    def rng_state(self) -> dict:
        return self._rng.bit_generator.state

    def set_rng_state(self, state: dict) -> None:
        self._rng.bit_generator.state = state


class CityMap:
    """Immutable, cross-referenced container of areas and POIs."""

    def __init__(self, areas: list[Area], pois: list[Poi]):
        self.areas = sorted(areas, key=lambda a: a.id)
        self.pois = sorted(pois, key=lambda p: p.id)
        self.area_by_id = {a.id: a for a in self.areas}
        self.poi_by_id = {p.id: p for p in self.pois}
        self._pois_by_area: dict[int, list[Poi]] = {a.id: [] for a in self.areas}
        for poi in self.pois:
            # Tolerate dangling area ids here; validate() names the offender.
            self._pois_by_area.setdefault(poi.area_id, []).append(poi)
        self._pois_by_category: dict[str, list[Poi]] = {}
        for poi in self.pois:
            self._pois_by_category.setdefault(poi.category, []).append(poi)
        self._area_popularity = {
            a.id: (
                sum(p.popularity for p in self._pois_by_area[a.id])
                / len(self._pois_by_area[a.id])
                if self._pois_by_area[a.id]
                else 0.0
            )
            for a in self.areas
        }

    def pois_in_area(self, area_id: int) -> list[Poi]:
        return self._pois_by_area[area_id]

    def pois_of_category(self, category: str) -> list[Poi]:
        return self._pois_by_category.get(category, [])

    def area_popularity(self, area_id: int) -> float:
        return self._area_popularity[area_id]

    def validate(self) -> None:
        for poi in self.pois:
            if not (0.0 <= poi.popularity <= 1.0):
                raise CityValidationError(
                    f"poi {poi.id}: popularity {poi.popularity} outside [0, 1]"
                )
            if poi.category not in CATEGORIES:
                raise CityValidationError(
                    f"poi {poi.id}: unknown category {poi.category!r}"
                )
            if poi.area_id not in self.area_by_id:
                raise CityValidationError(
                    f"poi {poi.id}: dangling area_id {poi.area_id}"
                )
            norm = math.sqrt(sum(x * x for x in poi.feature_vector))
            if abs(norm - 1.0) > 1e-6:
                raise CityValidationError(
                    f"poi {poi.id}: feature_vector norm {norm:.6f} != 1"
                )
            if not all(math.isfinite(c) for c in poi.position):
                raise CityValidationError(f"poi {poi.id}: non-finite position")
        for area in self.areas:
            members = []
            for pid in area.poi_ids:
                poi = self.poi_by_id.get(pid)
                if poi is None:
                    raise CityValidationError(
                        f"area {area.id}: lists unknown poi {pid}"
                    )
                if poi.area_id != area.id:
                    raise CityValidationError(
                        f"area {area.id}: poi {pid} has area_id {poi.area_id}"
                    )
                members.append(poi)
            if members:
                cx = sum(p.position[0] for p in members) / len(members)
                cy = sum(p.position[1] for p in members) / len(members)
                if distance(area.centroid, (cx, cy)) > 1.0:
                    raise CityValidationError(
                        f"area {area.id}: centroid off POI mean by > 1 m"
                    )


def distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Euclidean distance in meters."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


def nearby_areas(
    origin: tuple[float, float], city: CityMap, k: int = DEFAULT_NEARBY_K
) -> list[Area]:
    """Rank areas by mean-popularity over distance, nearest-best first.

    score = popularity_mean / (1 + distance_to_centroid_km); ties break on
    ascending area id.  Returns all areas when the city has fewer than k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scored = []
    for area in city.areas:
        d_km = distance(origin, area.centroid) / 1000.0
        score = city.area_popularity(area.id) / (1.0 + d_km)
        scored.append((-score, area.id, area))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [area for _, _, area in scored[:k]]


def candidate_pois(
    city: CityMap,
    area: Area,
    categories: set[str] | frozenset[str],
    cap: int = DEFAULT_POI_CAP,
) -> list[Poi]:
    """POIs in the area matching any category, best-first, truncated to cap.

    Sorted by popularity descending, then distance to the area centroid
    ascending, then id.
    """
    if not categories:
        raise InvalidIntentionError("no POI categories supplied")
    matches = [p for p in city.pois_in_area(area.id) if p.category in categories]
    matches.sort(
        key=lambda p: (-p.popularity, distance(p.position, area.centroid), p.id)
    )
    return matches[:cap]


def city_to_dict(city: CityMap) -> dict:
    return {
        "areas": [
            {
                "id": a.id,
                "name": a.name,
                "centroid": list(a.centroid),
                "poi_ids": list(a.poi_ids),
            }
            for a in city.areas
        ],
        "pois": [
            {
                "id": p.id,
                "name": p.name,
                "category": p.category,
                "area_id": p.area_id,
                "position": list(p.position),
                "popularity": p.popularity,
                "feature_vector": list(p.feature_vector),
            }
            for p in city.pois
        ],
    }


def city_from_dict(data: dict) -> CityMap:
    try:
        areas = [
            Area(
                id=int(a["id"]),
                name=str(a["name"]),
                centroid=(float(a["centroid"][0]), float(a["centroid"][1])),
                poi_ids=tuple(int(x) for x in a["poi_ids"]),
            )
            for a in data["areas"]
        ]
        pois = [
            Poi(
                id=int(p["id"]),
                name=str(p["name"]),
                category=str(p["category"]),
                area_id=int(p["area_id"]),
                position=(float(p["position"][0]), float(p["position"][1])),
                popularity=float(p["popularity"]),
                feature_vector=tuple(float(x) for x in p["feature_vector"]),
            )
            for p in data["pois"]
        ]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CityValidationError(f"malformed city record: {exc}") from exc
    city = CityMap(areas, pois)
    city.validate()
    return city


def load_city(path) -> CityMap:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    return city_from_dict(data)


def save_city(city: CityMap, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(city_to_dict(city), fh)


def make_feature_vector(
    category: str, popularity: float, rng: np.random.Generator
) -> tuple[float, ...]:
    """Unit-norm vector: category one-hot block, popularity, seeded jitter."""
    vec = np.zeros(FEATURE_DIM)
    vec[CATEGORIES.index(category)] = 1.0
    vec[len(CATEGORIES)] = popularity
    vec[len(CATEGORIES) + 1 :] = rng.uniform(-0.15, 0.15, FEATURE_DIM - len(CATEGORIES) - 1)
    vec /= np.linalg.norm(vec)
    return tuple(float(x) for x in vec)


# Category mix inside each generated area; homes dominate so any area can
# anchor households.
_GEN_CATEGORY_WEIGHTS = {
    "home": 0.34,
    "restaurant": 0.10,
    "cafe": 0.08,
    "shop": 0.12,
    "office": 0.10,
    "park": 0.06,
    "school": 0.05,
    "transit": 0.05,
    "entertainment": 0.06,
    "hospital": 0.04,
}


def generate_city(
    nx: int,
    ny: int,
    pois_per_area: int,
    seed: int,
    area_size_m: float = 500.0,
) -> CityMap:
    """Synthetic grid city: nx*ny areas, each a square cell of POIs.

    Each area guarantees at least one home; one school, office, hospital,
    restaurant, and cafe are forced city-wide so every occupation can be
    anchored.  Deterministic under (nx, ny, pois_per_area, seed).
    """
    if nx < 1 or ny < 1 or pois_per_area < 1:
        raise ValueError("grid dimensions and pois_per_area must be >= 1")
    rng = np.random.default_rng(seed)
    cats = list(_GEN_CATEGORY_WEIGHTS)
    weights = np.array([_GEN_CATEGORY_WEIGHTS[c] for c in cats])
    weights /= weights.sum()

    pois: list[Poi] = []
    areas: list[Area] = []
    required = ["school", "office", "hospital", "restaurant", "cafe"]
    poi_id = 0
    for ay in range(ny):
        for ax in range(nx):
            area_id = ay * nx + ax
            x0, y0 = ax * area_size_m, ay * area_size_m
            chosen = list(rng.choice(cats, size=pois_per_area, p=weights))
            chosen[0] = "home"
            # Force city-wide anchor categories into the first areas.
            if area_id < len(required) and pois_per_area >= 2:
                chosen[1] = required[area_id]
            member_ids = []
            positions = []
            for cat in chosen:
                pos = (
                    float(x0 + rng.uniform(0.0, area_size_m)),
                    float(y0 + rng.uniform(0.0, area_size_m)),
                )
                popularity = float(np.round(rng.beta(2.0, 4.0), 4))
                pois.append(
                    Poi(
                        id=poi_id,
                        name=f"{cat}-{poi_id}",
                        category=str(cat),
                        area_id=area_id,
                        position=pos,
                        popularity=popularity,
                        feature_vector=make_feature_vector(str(cat), popularity, rng),
                    )
                )
                member_ids.append(poi_id)
                positions.append(pos)
                poi_id += 1
            cx = sum(p[0] for p in positions) / len(positions)
            cy = sum(p[1] for p in positions) / len(positions)
            areas.append(
                Area(
                    id=area_id,
                    name=f"area-{ax}-{ay}",
                    centroid=(cx, cy),
                    poi_ids=tuple(member_ids),
                )
            )
    city = CityMap(areas, pois)
    city.validate()
    return city
