"""Aggregate event logs into evaluation artifacts.

Time-use shares per age band, travel histograms by day type, rank
correlation of simulated visit counts against reference popularity, and
crowd-density grids.  All functions are pure over a completed log; exports
are CSV or JSON.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from citysim.errors import CitySimError
from citysim.events import iter_events
from citysim.world import MINUTES_PER_DAY, CityMap

logger = logging.getLogger(__name__)

TIMEUSE_CATEGORIES = ("work", "commute", "housework", "personal_care_sleep", "leisure", "other")
DEFAULT_AGE_BANDS = ((0, 19), (20, 39), (40, 59), (60, 110))
DEFAULT_CELL_M = 250.0

# Activity tag -> time-use category.  Meals placed by the day plan happen at
# home (personal care); eating triggered by hunger or leisure choice happens
# out (leisure).  The full table is documented in the README.
_HOME_MEALS = {"breakfast", "lunch", "dinner"}


def activity_category(tag: str, content: str) -> str:
    if tag == "sleep":
        return "personal_care_sleep"
    if tag == "work":
        return "work"
    if tag == "hygiene":
        return "personal_care_sleep"
    if tag == "errand":
        return "housework"
    if tag == "eat":
        return "personal_care_sleep" if content in _HOME_MEALS else "leisure"
    if tag in ("rest", "social", "leisure"):
        return "leisure"
    return "other"


@dataclass
class TimeUseTable:
    age_bands: list[str]
    categories: tuple[str, ...]
    shares: list[list[float]]  # row per band, column per category

    def validate(self) -> None:
        for label, row in zip(self.age_bands, self.shares):
            total = sum(row)
            if row and abs(total - 1.0) > 1e-9 and total > 0:
                raise CitySimError(f"time-use row {label} sums to {total}")


@dataclass
class TravelHistogram:
    weekday: list[float] = field(default_factory=lambda: [0.0] * 24)
    weekend: list[float] = field(default_factory=lambda: [0.0] * 24)
    weekday_days: int = 0
    weekend_days: int = 0
    n_agents: int = 0


@dataclass
class DensityGrid:
    cell_m: float
    origin: tuple[float, float]
    counts: list[list[int]]  # rows = y cells, columns = x cells

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)


def _band_label(band: tuple[int, int]) -> str:
    return f"{band[0]}-{band[1]}"


def timeuse_shares(log_path, personas, age_bands=DEFAULT_AGE_BANDS) -> TimeUseTable:
    """Normalized share of logged time per age band and activity category.

    Travel (move events) counts as commute; agents with zero logged time are
    excluded with a warning.
    """
    band_of_agent = {}
    for persona in personas:
        for band in age_bands:
            if band[0] <= persona.age <= band[1]:
                band_of_agent[persona.agent_id] = band
                break
    per_agent: dict[int, dict[str, float]] = {}
    for event in iter_events(log_path):
        agent = event["agent_id"]
        if event["kind"] == "activity_end":
            payload = event["payload"]
            category = activity_category(payload["tag"], payload["content"])
            minutes = payload["duration"]
        elif event["kind"] == "move":
            payload = event["payload"]
            category = "commute"
            minutes = payload["arrive"] - payload["depart"]
        else:
            continue
        if minutes <= 0:
            continue
        bucket = per_agent.setdefault(agent, {c: 0.0 for c in TIMEUSE_CATEGORIES})
        bucket[category] += minutes

    totals = {band: {c: 0.0 for c in TIMEUSE_CATEGORIES} for band in age_bands}
    for agent, bucket in per_agent.items():
        if sum(bucket.values()) <= 0:
            logger.warning("agent %s has zero logged time; excluded from time use", agent)
            continue
        band = band_of_agent.get(agent)
        if band is None:
            continue
        for category, minutes in bucket.items():
            totals[band][category] += minutes

    shares = []
    labels = []
    for band in age_bands:
        labels.append(_band_label(band))
        row_total = sum(totals[band].values())
        if row_total > 0:
            shares.append([totals[band][c] / row_total for c in TIMEUSE_CATEGORIES])
        else:
            shares.append([0.0] * len(TIMEUSE_CATEGORIES))
    table = TimeUseTable(age_bands=labels, categories=TIMEUSE_CATEGORIES, shares=shares)
    table.validate()
    return table


def travel_histogram(log_path, n_agents: int) -> TravelHistogram:
    """Mean trip departures per agent per hour, split weekday/weekend.

    A trip is counted at its departure tick.
    """
    hist = TravelHistogram(n_agents=n_agents)
    max_tick = 0
    counts = {"weekday": [0] * 24, "weekend": [0] * 24}
    for event in iter_events(log_path):
        max_tick = max(max_tick, event["tick"])
        if event["kind"] != "move":
            continue
        depart = event["payload"]["depart"]
        day = depart // MINUTES_PER_DAY
        hour = (depart % MINUTES_PER_DAY) // 60
        key = "weekday" if day % 7 < 5 else "weekend"
        counts[key][hour] += 1
    days = max(1, max_tick // MINUTES_PER_DAY)
    hist.weekday_days = sum(1 for d in range(days) if d % 7 < 5)
    hist.weekend_days = days - hist.weekday_days
    if hist.weekday_days and n_agents:
        hist.weekday = [c / (n_agents * hist.weekday_days) for c in counts["weekday"]]
    if hist.weekend_days and n_agents:
        hist.weekend = [c / (n_agents * hist.weekend_days) for c in counts["weekend"]]
    return hist


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(sim_counts: dict, ref_counts: dict) -> float:
    """Spearman rank correlation over POIs present in both inputs."""
    common = sorted(set(sim_counts) & set(ref_counts))
    if len(common) < 3:
        raise CitySimError(f"need >= 3 common POIs, got {len(common)}")
    sim = np.array([float(sim_counts[k]) for k in common])
    ref = np.array([float(ref_counts[k]) for k in common])
    rank_sim = _average_ranks(sim)
    rank_ref = _average_ranks(ref)
    sim_centered = rank_sim - rank_sim.mean()
    ref_centered = rank_ref - rank_ref.mean()
    denom = math.sqrt(float((sim_centered**2).sum() * (ref_centered**2).sum()))
    if denom == 0.0:
        return 0.0
    return float((sim_centered * ref_centered).sum() / denom)


def visit_counts(log_path) -> dict[int, int]:
    counts: dict[int, int] = {}
    for event in iter_events(log_path):
        if event["kind"] == "visit":
            poi = event["payload"]["poi"]
            counts[poi] = counts.get(poi, 0) + 1
    return counts


def density_grid(
    log_path,
    city: CityMap,
    cell_m: float = DEFAULT_CELL_M,
    window: tuple[int, int] | None = None,
) -> DensityGrid:
    """Visit counts binned into square cells; boundary points go to the
    floor cell."""
    xs = [p.position[0] for p in city.pois] or [0.0]
    ys = [p.position[1] for p in city.pois] or [0.0]
    origin = (math.floor(min(xs) / cell_m) * cell_m, math.floor(min(ys) / cell_m) * cell_m)
    nx = max(1, int(math.floor((max(xs) - origin[0]) / cell_m)) + 1)
    ny = max(1, int(math.floor((max(ys) - origin[1]) / cell_m)) + 1)
    counts = [[0] * nx for _ in range(ny)]
    for event in iter_events(log_path):
        if event["kind"] != "visit":
            continue
        if window is not None and not (window[0] <= event["tick"] < window[1]):
            continue
        x, y = event["payload"]["position"]
        cx = int(math.floor((x - origin[0]) / cell_m))
        cy = int(math.floor((y - origin[1]) / cell_m))
        if 0 <= cx < nx and 0 <= cy < ny:
            counts[cy][cx] += 1
    return DensityGrid(cell_m=cell_m, origin=origin, counts=counts)


def export(artifact, path, fmt: str) -> None:
    """Write any analytics artifact as CSV or JSON."""
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_as_jsonable(artifact), fh, indent=2, sort_keys=True)
        return
    if fmt != "csv":
        raise CitySimError(f"unknown export format {fmt!r}")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if isinstance(artifact, TimeUseTable):
            writer.writerow(["age_band", *artifact.categories])
            for label, row in zip(artifact.age_bands, artifact.shares):
                writer.writerow([label, *[f"{x:.6f}" for x in row]])
        elif isinstance(artifact, TravelHistogram):
            writer.writerow(["hour", "weekday", "weekend"])
            for hour in range(24):
                writer.writerow([hour, f"{artifact.weekday[hour]:.6f}", f"{artifact.weekend[hour]:.6f}"])
        elif isinstance(artifact, DensityGrid):
            for row in artifact.counts:
                writer.writerow(row)
        elif isinstance(artifact, dict):
            writer.writerow(["key", "value"])
            for key in sorted(artifact):
                writer.writerow([key, artifact[key]])
        else:
            raise CitySimError(f"cannot export {type(artifact).__name__} as CSV")


def _as_jsonable(artifact):
    if isinstance(artifact, TimeUseTable):
        return {
            "age_bands": artifact.age_bands,
            "categories": list(artifact.categories),
            "shares": artifact.shares,
        }
    if isinstance(artifact, TravelHistogram):
        return {
            "weekday": artifact.weekday,
            "weekend": artifact.weekend,
            "weekday_days": artifact.weekday_days,
            "weekend_days": artifact.weekend_days,
            "n_agents": artifact.n_agents,
        }
    if isinstance(artifact, DensityGrid):
        return {
            "cell_m": artifact.cell_m,
            "origin": list(artifact.origin),
            "counts": artifact.counts,
        }
    return artifact
