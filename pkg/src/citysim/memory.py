"""Per-agent memory: temporal stream, reflective entries, spatial beliefs.

Spatial beliefs are 4-dimensional (price, atmosphere, satisfaction,
convenience) with a single scalar uncertainty shared across dimensions.
Visits shrink the uncertainty through a scalar Kalman update; a nightly
decay pulls every dimension back toward the neutral 0.5.  Beliefs about
unvisited places are imputed from the most feature-similar visited ones and
stay ephemeral: only real visits create entries.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

from citysim.errors import TimeRegressionError
from citysim.oracle import OracleError, OracleRequest
from citysim.world import CityMap, Poi

BELIEF_DIMS = ("price", "atmosphere", "satisfaction", "convenience")
NEUTRAL_BELIEF = 0.5
SIGMA_PRIOR = 0.25
SIGMA_OBS = 0.2
DECAY_LAMBDA = 0.03
IMPUTE_NEIGHBORS = 10
RETRIEVE_TOP_K = 5
RETRIEVE_WINDOW_MINUTES = 1440


@dataclass(slots=True)
class TemporalNode:
    node_id: int
    time: int
    location: int | None
    observation: str
    key: str


@dataclass(slots=True)
class ReflectiveEntry:
    entry_id: int
    text: str
    evidence: list[int]
    day: int


class TemporalMemory:
    """Append-only chronological stream of observation nodes."""

    def __init__(self):
        self.nodes: list[TemporalNode] = []

    def append(self, time: int, location: int | None, observation: str, key: str) -> int:
        if self.nodes and time < self.nodes[-1].time:
            raise TimeRegressionError(
                f"append at t={time} behind stream head t={self.nodes[-1].time}"
            )
        node_id = len(self.nodes)
        self.nodes.append(TemporalNode(node_id, time, location, observation, key))
        return node_id

    def window(self, now: int, span: int = RETRIEVE_WINDOW_MINUTES) -> list[TemporalNode]:
        return [n for n in self.nodes if now - n.time <= span and n.time <= now]

    def day_nodes(self, day_index: int) -> list[TemporalNode]:
        lo, hi = day_index * 1440, (day_index + 1) * 1440
        return [n for n in self.nodes if lo <= n.time < hi]

    def to_dict(self) -> dict:
        return {
            "nodes": [
                [n.node_id, n.time, n.location, n.observation, n.key] for n in self.nodes
            ]
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TemporalMemory":
        mem = cls()
        for node_id, time, location, observation, key in data["nodes"]:
            mem.nodes.append(TemporalNode(node_id, time, location, observation, key))
        return mem


_TOKEN_RE = re.compile(r"[a-z0-9']+")


class BagOfWordsEmbedding:
    """Deterministic term-frequency embedding with cosine similarity.

    Stands in for a model-backed embedding service; anything exposing
    embed() and similarity() can replace it.
    """

    def embed(self, text: str) -> Counter:
        return Counter(_TOKEN_RE.findall(text.lower()))

    def similarity(self, a: Counter, b: Counter) -> float:
        if not a or not b:
            return 0.0
        dot = sum(count * b[token] for token, count in a.items())
        if dot == 0:
            return 0.0
        norm_a = math.sqrt(sum(c * c for c in a.values()))
        norm_b = math.sqrt(sum(c * c for c in b.values()))
        return dot / (norm_a * norm_b)


def retrieve_temporal(
    memory: TemporalMemory,
    query: str,
    now: int,
    embedder: BagOfWordsEmbedding | None = None,
    k: int = RETRIEVE_TOP_K,
    window: int = RETRIEVE_WINDOW_MINUTES,
) -> list[TemporalNode]:
    """Top-k in-window nodes by cosine similarity to the query.

    Ties break by recency (newer first), then by higher node id.
    """
    embedder = embedder or BagOfWordsEmbedding()
    query_vec = embedder.embed(query)
    candidates = memory.window(now, window)
    scored = [
        (embedder.similarity(query_vec, embedder.embed(node.observation)), node.time, node.node_id, node)
        for node in candidates
    ]
    scored.sort(key=lambda t: (-t[0], -t[1], -t[2]))
    return [node for _, _, _, node in scored[:k]]


@dataclass(slots=True)
class BeliefVector:
    dims: list[float] = field(default_factory=lambda: [NEUTRAL_BELIEF] * 4)
    sigma: float = SIGMA_PRIOR
    visit_count: int = 0
    last_update: int = 0

    def copy(self) -> "BeliefVector":
        return BeliefVector(list(self.dims), self.sigma, self.visit_count, self.last_update)


def neutral_belief() -> BeliefVector:
    return BeliefVector()


def kalman_update(belief: BeliefVector, obs: list[float], now: int | None = None) -> BeliefVector:
    """Blend an observation into the belief with gain sigma/(sigma+sigma_obs).

    One scalar uncertainty is shared across the four dimensions, so a single
    gain updates all of them; uncertainty strictly shrinks and never
    reaches zero.
    """
    if len(obs) != len(BELIEF_DIMS):
        raise ValueError(f"observation needs {len(BELIEF_DIMS)} dims, got {len(obs)}")
    for value in obs:
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"observation value {value} outside [0, 1]")
    gain = belief.sigma / (belief.sigma + SIGMA_OBS)
    new_dims = [gain * o + (1.0 - gain) * d for o, d in zip(obs, belief.dims)]
    return BeliefVector(
        dims=new_dims,
        sigma=(1.0 - gain) * belief.sigma,
        visit_count=belief.visit_count + 1,
        last_update=belief.last_update if now is None else now,
    )


class SpatialMemory:
    """Beliefs about visited POIs only, keyed by POI id."""

    def __init__(self):
        self.beliefs: dict[int, BeliefVector] = {}

    def observe(self, poi_id: int, obs: list[float], now: int) -> BeliefVector:
        prior = self.beliefs.get(poi_id, neutral_belief())
        updated = kalman_update(prior, obs, now=now)
        self.beliefs[poi_id] = updated
        return updated

    def to_dict(self) -> dict:
        return {
            "beliefs": {
                str(pid): [b.dims, b.sigma, b.visit_count, b.last_update]
                for pid, b in sorted(self.beliefs.items())
            }
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpatialMemory":
        mem = cls()
        for pid, (dims, sigma, visits, last) in data["beliefs"].items():
            mem.beliefs[int(pid)] = BeliefVector(list(dims), sigma, visits, last)
        return mem


def decay_beliefs(memory: SpatialMemory, lam: float = DECAY_LAMBDA) -> None:
    """Move every belief dimension toward neutral by factor lam, in place.

    Called once per simulated day by the engine.
    """
    for belief in memory.beliefs.values():
        belief.dims = [(1.0 - lam) * d + lam * NEUTRAL_BELIEF for d in belief.dims]


def _poi_similarity(a: Poi, b: Poi) -> float:
    return sum(x * y for x, y in zip(a.feature_vector, b.feature_vector))


def impute_belief(
    memory: SpatialMemory, target: Poi, city: CityMap, k: int = IMPUTE_NEIGHBORS
) -> tuple[BeliefVector, bool]:
    """Estimate a belief for an unvisited POI from similar visited ones.

    Takes the unweighted mean over the k most feature-similar visited POIs;
    the returned uncertainty is the max over those neighbors so doubt is
    surfaced to the selection step.  Empty memory gives the neutral prior.
    The result is ephemeral and never written back.
    """
    if not memory.beliefs:
        return neutral_belief(), True
    scored = []
    for pid, belief in memory.beliefs.items():
        poi = city.poi_by_id.get(pid)
        if poi is None or pid == target.id:
            continue
        scored.append((-_poi_similarity(target, poi), pid, belief))
    if not scored:
        return neutral_belief(), True
    scored.sort(key=lambda t: (t[0], t[1]))
    neighbors = [belief for _, _, belief in scored[:k]]
    dims = [
        sum(b.dims[i] for b in neighbors) / len(neighbors) for i in range(len(BELIEF_DIMS))
    ]
    sigma = max(b.sigma for b in neighbors)
    return BeliefVector(dims=dims, sigma=sigma, visit_count=0), True


def impute_beliefs_batch(
    memory: SpatialMemory, targets: list[Poi], city: CityMap, k: int = IMPUTE_NEIGHBORS
) -> dict[int, BeliefVector]:
    """Vectorized impute_belief over many candidates at once.

    Same neighbor rule and tie-breaking as the scalar form; used on the
    movement hot path where candidate lists run to hundreds of POIs.
    """
    import numpy as np

    result: dict[int, BeliefVector] = {}
    if not targets:
        return result
    visited = [
        (pid, belief)
        for pid, belief in sorted(memory.beliefs.items())
        if pid in city.poi_by_id
    ]
    if not visited:
        for target in targets:
            result[target.id] = neutral_belief()
        return result
    pids = np.array([pid for pid, _ in visited])
    features = np.array([city.poi_by_id[pid].feature_vector for pid, _ in visited])
    dim_rows = np.array([belief.dims for _, belief in visited])
    sigmas = np.array([belief.sigma for _, belief in visited])
    target_features = np.array([t.feature_vector for t in targets])
    sims = target_features @ features.T
    for i, target in enumerate(targets):
        keep = pids != target.id
        if not keep.any():
            result[target.id] = neutral_belief()
            continue
        row_sims, row_pids = sims[i][keep], pids[keep]
        order = np.lexsort((row_pids, -row_sims))[:k]
        idx = np.flatnonzero(keep)[order]
        dims = dim_rows[idx].mean(axis=0)
        result[target.id] = BeliefVector(
            dims=[float(x) for x in dims], sigma=float(sigmas[idx].max()), visit_count=0
        )
    return result


def validate_evidence(
    evidence: list[int], temporal: TemporalMemory, reflective: list[ReflectiveEntry]
) -> bool:
    """Evidence may cite temporal nodes or earlier reflective entries."""
    if not evidence:
        return False
    node_ids = {n.node_id for n in temporal.nodes}
    entry_ids = {e.entry_id for e in reflective}
    return all(ref in node_ids or ref in entry_ids for ref in evidence)


def nightly_reflection(
    temporal: TemporalMemory,
    reflective: list[ReflectiveEntry],
    oracle,
    agent_context: dict,
    day_index: int,
) -> list[ReflectiveEntry]:
    """Ask the oracle for up to five insights over the day's nodes.

    Insights whose evidence fails referential integrity are dropped, not
    repaired.  Oracle failure yields an empty list.
    """
    day_nodes = temporal.day_nodes(day_index)
    if not day_nodes:
        return []
    context = dict(agent_context)
    context["day"] = day_index
    context["nodes"] = [
        {"id": n.node_id, "time": n.time, "key": n.key, "observation": n.observation}
        for n in day_nodes
    ]
    try:
        response = oracle.call(OracleRequest(kind="reflect", context=context))
    except OracleError:
        return []
    accepted: list[ReflectiveEntry] = []
    next_id = (reflective[-1].entry_id + 1) if reflective else 0
    for insight in response.payload["insights"][:5]:
        evidence = [int(x) for x in insight["evidence"]]
        if not validate_evidence(evidence, temporal, reflective):
            continue
        entry = ReflectiveEntry(next_id, str(insight["text"]), evidence, day_index)
        reflective.append(entry)
        accepted.append(entry)
        next_id += 1
    return accepted
