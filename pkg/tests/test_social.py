import numpy as np
import pytest

from citysim.cognition import NeedsState
from citysim.social import (
    SocialEdge,
    SocialNetwork,
    converse,
    demographic_similarity,
    init_network,
    partner_weights,
    pick_online_contact,
    select_partner,
    should_contact_online,
    update_edge,
)


def needs_with_social(value):
    state = NeedsState()
    state.scores["social"] = value
    return state


class TestInitNetwork:
    def test_household_members_linked_at_point_eight(self, city):
        from citysim.persona import generate_population

        personas = generate_population(60, city, seed=9)
        net = init_network(personas, seed=9)
        by_home = {}
        for persona in personas:
            by_home.setdefault(persona.home_poi, []).append(persona)
        households = [g for g in by_home.values() if len(g) > 1]
        assert households
        u, v = households[0][0].agent_id, households[0][1].agent_id
        assert net.edge(u, v).scalar() == pytest.approx(0.8)
        assert net.edge(v, u).scalar() == pytest.approx(0.8)

    def test_identical_profiles_link_at_half(self, personas):
        # similarity 1 -> 0.3 + 0.2 * 1 = 0.5 for non-household twins
        twins = [personas[0], personas[1]]
        a, b = twins
        assert demographic_similarity(a, a) == 1.0

    def test_single_agent_population_has_no_edges(self, personas):
        net = init_network(personas[:1], seed=1)
        assert net.edges == {}

    def test_deterministic_under_seed(self, personas):
        a = init_network(personas, seed=3).to_dict()
        b = init_network(personas, seed=3).to_dict()
        assert a == b

    def test_no_self_edges(self, personas):
        net = init_network(personas, seed=3)
        assert all(u != v for (u, v) in net.edges)

    def test_acquaintance_level_formula(self, personas):
        net = SocialNetwork()
        with pytest.raises(ValueError):
            net.set_edge(1, 1, SocialEdge(0.5, 0.5, 0.5))


class TestSelectPartner:
    def _network(self, scalars):
        net = SocialNetwork()
        for v, s in scalars.items():
            net.set_edge(0, v, SocialEdge(s, s, s))
        return net

    def test_probabilities_proportional_to_edge_scalars(self):
        net = self._network({1: 0.6, 2: 0.2, 3: 0.2})
        rng = np.random.default_rng(5)
        draws = [select_partner(0, [1, 2, 3], net, rng) for _ in range(100_000)]
        counts = {v: draws.count(v) / len(draws) for v in (1, 2, 3)}
        assert counts[1] == pytest.approx(0.6, abs=0.01)
        assert counts[2] == pytest.approx(0.2, abs=0.01)
        assert counts[3] == pytest.approx(0.2, abs=0.01)

    def test_singleton_with_edge_is_certain(self):
        net = self._network({1: 0.4})
        rng = np.random.default_rng(5)
        assert select_partner(0, [1], net, rng) == 1

    def test_empty_colocated_gives_none(self):
        rng = np.random.default_rng(5)
        assert select_partner(0, [], SocialNetwork(), rng) is None

    def test_stranger_floor_enables_first_contact(self):
        net = SocialNetwork()  # no edges at all
        rng = np.random.default_rng(5)
        assert select_partner(0, [7], net, rng) == 7

    def test_weights_match_formula_with_floor(self):
        net = self._network({1: 0.6})
        weights = partner_weights(0, [1, 2], net)
        assert weights.tolist() == [pytest.approx(0.6), pytest.approx(0.05)]

    def test_self_excluded(self):
        net = self._network({1: 0.5})
        rng = np.random.default_rng(5)
        assert select_partner(0, [0], net, rng) is None


class TestOnline:
    def test_low_social_during_leisure_triggers(self):
        assert should_contact_online(needs_with_social(0.15), 600, "leisure")

    def test_work_block_gates_contact(self):
        assert not should_contact_online(needs_with_social(0.15), 600, "mandatory")

    def test_satisfied_social_does_not_trigger(self):
        assert not should_contact_online(needs_with_social(0.5), 600, "leisure")

    def test_picks_highest_scalar_noncolocated(self):
        net = SocialNetwork()
        net.set_edge(0, 1, SocialEdge(0.9, 0.9, 0.9))
        net.set_edge(0, 2, SocialEdge(0.4, 0.4, 0.4))
        assert pick_online_contact(0, colocated={1}, network=net) == 2
        assert pick_online_contact(0, colocated=set(), network=net) == 1
        assert pick_online_contact(0, colocated={1, 2}, network=net) is None


class TestConverse:
    def _context(self, s_u, s_v):
        return {
            "initiator_name": "A",
            "partner_name": "B",
            "edge_u_scalar": s_u,
            "edge_v_scalar": s_v,
            "tick": 600,
        }

    def test_strong_edges_go_positive(self, stub_oracle):
        outcome, transcript = converse(0, 1, "face_to_face", self._context(0.8, 0.8), stub_oracle)
        assert outcome == "positive"
        assert transcript

    def test_weak_edges_go_negative(self, stub_oracle):
        outcome, _ = converse(0, 1, "face_to_face", self._context(0.1, 0.1), stub_oracle)
        assert outcome == "negative"

    def test_oracle_failure_is_neutral_untranscribed(self, failing_oracle):
        outcome, transcript = converse(0, 1, "online", self._context(0.8, 0.8), failing_oracle)
        assert outcome == "neutral"
        assert transcript == []


class TestUpdateEdge:
    def test_positive_moves_toward_one(self):
        edge = SocialEdge(0.5, 0.5, 0.5)
        update_edge(edge, "positive")
        assert edge.affinity == pytest.approx(0.525)

    def test_saturated_edge_is_fixed_point(self):
        edge = SocialEdge(1.0, 1.0, 1.0)
        update_edge(edge, "positive")
        assert (edge.affinity, edge.trust, edge.familiarity) == (1.0, 1.0, 1.0)

    def test_neutral_touches_familiarity_only(self):
        edge = SocialEdge(0.5, 0.5, 0.5)
        update_edge(edge, "neutral")
        assert edge.affinity == 0.5
        assert edge.trust == 0.5
        assert edge.familiarity == pytest.approx(0.51)

    def test_negative_decays_proportionally(self):
        edge = SocialEdge(0.5, 0.5, 0.5)
        update_edge(edge, "negative")
        assert edge.trust == pytest.approx(0.475)

    def test_repeated_positives_converge_monotonically(self):
        edge = SocialEdge(0.2, 0.2, 0.2)
        last = edge.affinity
        for _ in range(200):
            update_edge(edge, "positive")
            assert 0.0 <= edge.affinity <= 1.0
            assert edge.affinity >= last
            last = edge.affinity
        assert edge.affinity == pytest.approx(1.0, abs=1e-4)

    def test_unknown_outcome_rejected(self):
        with pytest.raises(ValueError):
            update_edge(SocialEdge(0.5, 0.5, 0.5), "confusing")
