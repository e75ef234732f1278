"""Weighted social network with evolving 3-dimensional edge beliefs.

Each directed edge holds affinity, trust, and familiarity in [0, 1].
Partners are sampled proportionally to the edge scalar (mean of the three),
with a small stranger floor so first contacts can happen at all; outcomes
nudge the dimensions by proportional-gap updates that stay bounded without
clamping.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from citysim.oracle import Oracle, OracleError, OracleRequest

logger = logging.getLogger(__name__)

EDGE_DIMS = ("affinity", "trust", "familiarity")
HOUSEHOLD_LEVEL = 0.8
COWORKER_LEVEL = 0.5
ACQUAINTANCE_BASE = 0.3
ACQUAINTANCE_SIM_WEIGHT = 0.2
STRANGER_FLOOR = 0.05
NEW_EDGE_DIMS = (0.1, 0.1, 0.05)  # first contact, before the outcome update
POSITIVE_GAIN = 0.05
NEGATIVE_GAIN = 0.05
NEUTRAL_FAMILIARITY_GAIN = 0.02
DEMOGRAPHIC_NEIGHBORS = 5
SOCIAL_TICK_MINUTES = 30


@dataclass(slots=True)
class SocialEdge:
    affinity: float
    trust: float
    familiarity: float
    last_interaction: int = -1

    def scalar(self) -> float:
        return (self.affinity + self.trust + self.familiarity) / 3.0

    def to_list(self) -> list:
        return [self.affinity, self.trust, self.familiarity, self.last_interaction]

    @classmethod
    def from_list(cls, data: list) -> "SocialEdge":
        return cls(data[0], data[1], data[2], int(data[3]))


class SocialNetwork:
    """Directed edge map plus per-agent contact logs."""

    def __init__(self):
        self.edges: dict[tuple[int, int], SocialEdge] = {}
        self.contact_log: dict[int, list[tuple[int, int]]] = {}

    def edge(self, u: int, v: int) -> SocialEdge | None:
        return self.edges.get((u, v))

    def set_edge(self, u: int, v: int, edge: SocialEdge) -> None:
        if u == v:
            raise ValueError("self-edges are not allowed")
        self.edges[(u, v)] = edge

    def ensure_edge(self, u: int, v: int, now: int) -> SocialEdge:
        edge = self.edges.get((u, v))
        if edge is None:
            edge = SocialEdge(*NEW_EDGE_DIMS, last_interaction=now)
            self.set_edge(u, v, edge)
        return edge

    def log_contact(self, agent_id: int, minute: int, partner_id: int) -> None:
        self.contact_log.setdefault(agent_id, []).append((minute, partner_id))

    def contacts_of(self, agent_id: int) -> list[tuple[int, int]]:
        return self.contact_log.get(agent_id, [])

    def to_dict(self) -> dict:
        return {
            "edges": {f"{u},{v}": e.to_list() for (u, v), e in sorted(self.edges.items())},
            "contact_log": {str(a): log for a, log in sorted(self.contact_log.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SocialNetwork":
        net = cls()
        for key, values in data["edges"].items():
            u, v = key.split(",")
            net.edges[(int(u), int(v))] = SocialEdge.from_list(values)
        for agent, log in data["contact_log"].items():
            net.contact_log[int(agent)] = [(int(m), int(p)) for m, p in log]
        return net


def demographic_similarity(a, b, area_of: dict | None = None) -> float:
    """1 minus normalized L1 distance over (age, occupation match, area match).

    area_of maps home POI id to area id; without it, same home POI counts
    as the same area.
    """
    age_gap = abs(a.age - b.age) / 110.0
    occupation_gap = 0.0 if a.occupation == b.occupation else 1.0
    if area_of is not None:
        area_gap = 0.0 if area_of.get(a.home_poi) == area_of.get(b.home_poi) else 1.0
    else:
        area_gap = 0.0 if a.home_poi == b.home_poi else 1.0
    return 1.0 - (age_gap + occupation_gap + area_gap) / 3.0


def init_network(
    personas: list,
    seed: int,
    k_neighbors: int = DEMOGRAPHIC_NEIGHBORS,
    city=None,
) -> SocialNetwork:
    """Seed the network from households, workplaces, and demographic similarity.

    Household members get mutual edges at 0.8 on all dimensions, coworkers
    and classmates 0.5, and each agent links to its k nearest-demographic
    peers at 0.3 + 0.2 * similarity.  Deterministic under the seed.
    """
    del seed  # construction is fully rule-driven; kept for interface stability
    area_of = (
        {p.id: p.area_id for p in city.pois} if city is not None else None
    )
    net = SocialNetwork()

    by_home: dict[int, list] = {}
    by_work: dict[int, list] = {}
    for persona in personas:
        by_home.setdefault(persona.home_poi, []).append(persona)
        if persona.work_poi is not None:
            by_work.setdefault(persona.work_poi, []).append(persona)

    def link(u, v, level: float) -> None:
        if u.agent_id == v.agent_id:
            return
        for a, b in ((u, v), (v, u)):
            existing = net.edge(a.agent_id, b.agent_id)
            if existing is None or existing.scalar() < level:
                net.set_edge(a.agent_id, b.agent_id, SocialEdge(level, level, level))

    for members in by_home.values():
        for i, u in enumerate(members):
            for v in members[i + 1 :]:
                link(u, v, HOUSEHOLD_LEVEL)
    for members in by_work.values():
        for i, u in enumerate(members):
            for v in members[i + 1 :]:
                link(u, v, COWORKER_LEVEL)

    for u in personas:
        scored = []
        for v in personas:
            if v.agent_id == u.agent_id:
                continue
            scored.append((-demographic_similarity(u, v, area_of), v.agent_id, v))
        scored.sort(key=lambda t: (t[0], t[1]))
        for neg_sim, _, v in scored[:k_neighbors]:
            level = ACQUAINTANCE_BASE + ACQUAINTANCE_SIM_WEIGHT * (-neg_sim)
            existing = net.edge(u.agent_id, v.agent_id)
            if existing is None or existing.scalar() < level:
                net.set_edge(u.agent_id, v.agent_id, SocialEdge(level, level, level))
    return net


def partner_weights(u: int, colocated: list[int], network: SocialNetwork) -> np.ndarray:
    """Selection weights over co-located agents: edge scalar or stranger floor."""
    weights = np.empty(len(colocated))
    for i, v in enumerate(colocated):
        edge = network.edge(u, v)
        weights[i] = edge.scalar() if edge is not None else STRANGER_FLOOR
    return weights


def select_partner(
    u: int, colocated: list[int], network: SocialNetwork, rng: np.random.Generator
) -> int | None:
    """Sample a conversation partner proportionally to edge scalars.

    Returns None when nobody is around or all weights are zero.  The caller
    enforces the one-selection-per-30-minutes rate limit.
    """
    candidates = [v for v in colocated if v != u]
    if not candidates:
        return None
    weights = partner_weights(u, candidates, network)
    total = weights.sum()
    if total <= 0.0:
        return None
    return candidates[int(rng.choice(len(candidates), p=weights / total))]


def should_contact_online(needs, minute_of_day: int, current_tier: str) -> bool:
    """Reach out remotely only when social need is below threshold during leisure."""
    del minute_of_day  # gating is by block tier, not wall-clock time
    return needs.scores["social"] <= needs.thresholds["social"] and current_tier == "leisure"


def pick_online_contact(u: int, colocated: set[int], network: SocialNetwork) -> int | None:
    """Highest-scalar existing contact who is not co-located right now."""
    best, best_key = None, None
    for (a, v), edge in network.edges.items():
        if a != u or v in colocated:
            continue
        key = (-edge.scalar(), v)
        if best_key is None or key < best_key:
            best, best_key = v, key
    return best


def converse(
    u: int,
    v: int,
    mode: str,
    context: dict,
    oracle: Oracle,
) -> tuple[str, list[str]]:
    """Run one exchange and judge its outcome.

    context must carry initiator/partner digests, both edge scalars, and the
    tick.  Oracle failure yields a neutral outcome with no transcript.
    """
    payload = dict(context)
    payload["initiator"] = u
    payload["partner"] = v
    payload["mode"] = mode
    try:
        response = oracle.call(OracleRequest(kind="converse", context=payload))
    except OracleError as exc:
        logger.warning("converse oracle failure between %s and %s: %s", u, v, exc)
        return "neutral", []
    return str(response.payload["outcome"]), [str(line) for line in response.payload["transcript"]]


def update_edge(edge: SocialEdge, outcome: str, now: int | None = None) -> SocialEdge:
    """Outcome-driven proportional-gap update; dims stay in [0, 1] by construction."""
    if outcome == "positive":
        edge.affinity += POSITIVE_GAIN * (1.0 - edge.affinity)
        edge.trust += POSITIVE_GAIN * (1.0 - edge.trust)
        edge.familiarity += POSITIVE_GAIN * (1.0 - edge.familiarity)
    elif outcome == "negative":
        edge.affinity -= NEGATIVE_GAIN * edge.affinity
        edge.trust -= NEGATIVE_GAIN * edge.trust
        edge.familiarity -= NEGATIVE_GAIN * edge.familiarity
    elif outcome == "neutral":
        edge.familiarity += NEUTRAL_FAMILIARITY_GAIN * (1.0 - edge.familiarity)
    else:
        raise ValueError(f"unknown outcome {outcome!r}")
    if now is not None:
        edge.last_interaction = now
    return edge
