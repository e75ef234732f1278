import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from citysim.persona import Persona
from citysim.cognition import (
    NEED_NAMES,
    NEED_PRIORITY,
    NEED_THRESHOLDS,
    GoalSet,
    NeedsState,
    TriggerReport,
    apply_need_effects,
    decay_needs,
    dispatch,
    dominant_need,
    goal_triggers,
    init_needs,
    need_fulfillment,
    revise_goals,
)

unit = st.floats(0.0, 1.0)


def make_state(hunger=0.9, energy=0.9, safety=0.9, social=0.9):
    state = NeedsState()
    state.scores = {"hunger": hunger, "energy": energy, "safety": safety, "social": social}
    return state


class TestInitNeeds:
    def test_deterministic_under_seed(self, personas, stub_oracle):
        day = {"day": 0, "weather": "clear"}
        a = init_needs(personas[0], day, stub_oracle)
        b = init_needs(personas[0], day, stub_oracle)
        assert a.scores == b.scores
        assert all(0.6 <= v <= 1.0 for v in a.scores.values())

    def test_out_of_range_scores_clamped(self, personas):
        from citysim.oracle import Oracle

        class HotBackend:
            name = "hot"

            def handle(self, request):
                return {"scores": {"hunger": 1.3, "energy": 0.5, "safety": 0.5, "social": -0.2}}

        state = init_needs(personas[0], {"day": 0}, Oracle(HotBackend()))
        assert state.scores["hunger"] == 1.0
        assert state.scores["social"] == 0.0

    def test_failure_falls_back_to_point_eight(self, personas, failing_oracle):
        state = init_needs(personas[0], {"day": 0}, failing_oracle)
        assert state.scores == {n: 0.8 for n in NEED_NAMES}


class TestDecayNeeds:
    def test_two_hours_at_rate(self):
        state = make_state(hunger=0.5)
        state.decay_per_hour["hunger"] = 0.05
        decay_needs(state, 120)
        assert state.scores["hunger"] == pytest.approx(0.4)

    def test_floors_at_zero(self):
        state = make_state(hunger=0.01)
        state.decay_per_hour["hunger"] = 0.05
        decay_needs(state, 60)
        assert state.scores["hunger"] == 0.0

    def test_zero_minutes_is_identity(self):
        state = make_state()
        before = dict(state.scores)
        decay_needs(state, 0)
        assert state.scores == before

    @given(unit, st.floats(1.0, 300.0), st.floats(1.0, 300.0))
    def test_additive_over_splits_above_floor(self, start, a, b):
        rate = 0.001  # small enough to stay off the floor
        one = make_state(hunger=start)
        one.decay_per_hour["hunger"] = rate
        decay_needs(decay_needs(one, a), b)
        two = make_state(hunger=start)
        two.decay_per_hour["hunger"] = rate
        decay_needs(two, a + b)
        if two.scores["hunger"] > 0:
            assert one.scores["hunger"] == pytest.approx(two.scores["hunger"], abs=1e-12)


class TestDominantNeed:
    def test_only_hunger_below(self):
        assert dominant_need(make_state(hunger=0.25, energy=0.5, safety=0.5, social=0.5)) == "hunger"

    def test_priority_outranks_lower_scores(self):
        # Hunger wins even when safety and others sit lower.
        state = make_state(hunger=0.25, energy=0.15, safety=0.25, social=0.1)
        assert dominant_need(state) == "hunger"

    def test_all_satisfied_gives_none(self):
        assert dominant_need(make_state()) is None

    def test_boundary_is_at_or_below(self):
        assert dominant_need(make_state(hunger=0.3)) == "hunger"

    def test_all_sixteen_threshold_combinations(self):
        for below in itertools.product([False, True], repeat=4):
            scores = {}
            for name, is_below in zip(NEED_NAMES, below):
                threshold = NEED_THRESHOLDS[name]
                scores[name] = threshold - 0.05 if is_below else threshold + 0.05
            state = make_state(**scores)
            expected = next(
                (
                    name
                    for name in NEED_PRIORITY
                    if below[NEED_NAMES.index(name)]
                ),
                None,
            )
            assert dominant_need(state) == expected

    def test_result_written_to_persona(self, personas):
        persona = personas[0]
        dominant_need(make_state(hunger=0.1), persona)
        assert persona.dominant_need_text == "hunger"
        dominant_need(make_state(), persona)
        assert persona.dominant_need_text == ""


class TestNeedEffects:
    def test_eating_restores_hunger(self, stub_oracle):
        state = make_state(hunger=0.2)
        apply_need_effects(state, {"agent_id": 1, "activity": "lunch", "tag": "eat", "completed": True}, stub_oracle)
        assert state.scores["hunger"] == pytest.approx(0.8)

    def test_delta_clamped_at_one(self, stub_oracle):
        state = make_state(energy=0.5)
        apply_need_effects(state, {"agent_id": 1, "activity": "sleep", "tag": "sleep", "completed": True}, stub_oracle)
        assert state.scores["energy"] == 1.0

    def test_oracle_failure_leaves_state(self, failing_oracle):
        state = make_state(hunger=0.2)
        before = dict(state.scores)
        apply_need_effects(state, {"agent_id": 1, "activity": "lunch", "tag": "eat", "completed": True}, failing_oracle)
        assert state.scores == before

    @given(st.lists(st.sampled_from(["eat", "sleep", "social", "rest"]), max_size=12))
    def test_scores_stay_bounded_under_any_sequence(self, tags):
        from citysim.oracle import Oracle

        state = make_state(hunger=0.1, energy=0.1, safety=0.1, social=0.1)
        oracle = Oracle.stub(seed=1)
        for tag in tags:
            decay_needs(state, 90)
            apply_need_effects(state, {"agent_id": 1, "activity": tag, "tag": tag, "completed": True}, oracle)
            assert all(0.0 <= v <= 1.0 for v in state.scores.values())


class TestNeedFulfillment:
    def test_all_above_is_one(self):
        log = [{n: 0.9 for n in NEED_NAMES}] * 10
        assert need_fulfillment(log) == 1.0

    def test_half_qualifying(self):
        good = {n: 0.9 for n in NEED_NAMES}
        bad = {n: 0.1 for n in NEED_NAMES}
        assert need_fulfillment([good] * 144 + [bad] * 144) == 0.5

    def test_boundary_is_strict(self):
        pinned = {n: NEED_THRESHOLDS[n] for n in NEED_NAMES}
        assert need_fulfillment([pinned] * 288) == 0.0

    def test_empty_log_is_zero(self):
        assert need_fulfillment([]) == 0.0

    @given(st.lists(st.fixed_dictionaries({n: unit for n in NEED_NAMES}), max_size=50))
    def test_matches_brute_force_recount(self, log):
        expected = (
            sum(1 for s in log if all(s[n] > NEED_THRESHOLDS[n] for n in NEED_NAMES)) / len(log)
            if log
            else 0.0
        )
        assert need_fulfillment(log) == expected


class TestGoalTriggers:
    def test_financial_stress_boundary(self, personas):
        persona = Persona.from_dict(personas[0].to_dict())
        goals = GoalSet()
        persona.income, persona.expenses = 100.0, 120.0
        report = goal_triggers(persona, goals, [], [], {}, day_index=0)
        assert report.financial_stress  # 100 < 108
        persona.income = 108.0
        report = goal_triggers(persona, goals, [], [], {}, day_index=0)
        assert not report.financial_stress  # 108 < 108 is false

    @given(income=st.floats(1.0, 1e6), expenses=st.floats(1.0, 1e6))
    def test_financial_stress_iff_income_below_ratio(self, personas, income, expenses):
        persona = Persona.from_dict(personas[1].to_dict())
        persona.income, persona.expenses = income, expenses
        report = goal_triggers(persona, GoalSet(), [], [], {}, day_index=0)
        assert report.financial_stress == (income < 0.9 * expenses)

    def test_three_contacts_is_not_isolation(self, personas):
        persona = Persona.from_dict(personas[2].to_dict())
        persona.income, persona.expenses = 100.0, 50.0
        contacts = [(100, 1), (200, 2), (300, 3)]
        report = goal_triggers(persona, GoalSet(), contacts, [], {}, day_index=0)
        assert not report.social_isolation
        report = goal_triggers(persona, GoalSet(), contacts[:2], [], {}, day_index=0)
        assert report.social_isolation

    def test_interest_counts_satisfaction_above_half(self, personas):
        persona = personas[3]
        visits = [(10 * i, i) for i in range(10)]
        satisfaction = {i: (0.8 if i < 4 else 0.3) for i in range(10)}
        report = goal_triggers(persona, GoalSet(), [], visits, satisfaction, day_index=0)
        assert report.interest == pytest.approx(0.4)

    def test_monthly_due_after_thirty_days(self, personas):
        goals = GoalSet(last_revision=0)
        report = goal_triggers(personas[4], goals, [(0, i) for i in range(5)], [], {}, day_index=29)
        assert not report.monthly_due
        report = goal_triggers(personas[4], goals, [(0, i) for i in range(5)], [], {}, day_index=30)
        assert report.monthly_due


class TestReviseGoals:
    def test_no_triggers_is_an_error(self, personas, stub_oracle):
        report = TriggerReport(False, False, False, False, None, 0.5)
        with pytest.raises(ValueError):
            revise_goals(GoalSet(), personas[0], report, 0, stub_oracle)

    def test_financial_stress_yields_saving_goal(self, personas, stub_oracle):
        report = TriggerReport(True, False, False, False, None, 0.5)
        goals = revise_goals(GoalSet(), personas[0], report, 3, stub_oracle)
        assert any("cheaper meals" in g or "emergency fund" in g for g in goals.short_goals + goals.long_goals)
        assert goals.last_revision == 3

    def test_monthly_stub_is_deterministic(self, personas, stub_oracle):
        report = TriggerReport(False, False, True, False, None, 0.2)
        a = revise_goals(GoalSet(), personas[0], report, 30, stub_oracle)
        b = revise_goals(GoalSet(), personas[0], report, 30, stub_oracle)
        assert (a.short_goals, a.long_goals) == (b.short_goals, b.long_goals)

    def test_oracle_failure_does_not_mark_revision(self, personas, failing_oracle):
        goals = GoalSet(short_goals=["keep going"], last_revision=-1)
        report = TriggerReport(True, False, False, False, None, 0.5)
        result = revise_goals(goals, personas[0], report, 5, failing_oracle)
        assert result.short_goals == ["keep going"]
        assert result.last_revision == -1


class TestDispatch:
    def test_dominant_hunger_routes_to_place_selection(self, stub_oracle):
        decision = dispatch({"agent_id": 1, "dominant": "hunger", "block_tier": "leisure"}, stub_oracle)
        assert decision.module_choice == "place_selection"
        assert "restaurant" in decision.parameters["categories"]

    def test_no_dominant_active_block_is_none(self, stub_oracle):
        decision = dispatch(
            {"agent_id": 1, "dominant": None, "block_tier": "mandatory", "at_empty_leisure_start": False},
            stub_oracle,
        )
        assert decision.module_choice == "none"

    def test_unregistered_choice_twice_maps_to_none(self):
        from citysim.oracle import Oracle

        class RogueBackend:
            name = "rogue"

            def handle(self, request):
                return {"module": "teleport", "explanation": "zap", "parameters": {}}

        decision = dispatch({"agent_id": 1, "dominant": None}, Oracle(RogueBackend()))
        assert decision.module_choice == "none"

    def test_oracle_failure_is_none(self, failing_oracle):
        decision = dispatch({"agent_id": 1, "dominant": "hunger"}, failing_oracle)
        assert decision.module_choice == "none"
