import math

import pytest
from hypothesis import given, strategies as st

from loopscope.errors import InjectionError, ScenarioError
from loopscope.failures import (
    ABORTED,
    AVERTED,
    COMPLETED,
    HARM,
    FaultInjection,
    HarmRule,
    TimedScenario,
    attribute,
    inject,
    load_taxonomy,
    monte_carlo,
    simulate_timed,
    wilson_interval,
)
from loopscope.ir import Query, spec_from_json
from loopscope.oracles import (
    ConstantOracle,
    Fatigue,
    HumanModelParams,
    QueryContext,
    ReactionTime,
    stochastic_human,
)


class TestTaxonomy:
    def setup_method(self):
        self.catalog = load_taxonomy()

    def test_five_categories(self):
        assert [c.category_id for c in self.catalog.categories] == \
            ["FC1", "FC2", "FC3", "FC4", "FC5"]

    def test_category_names(self):
        names = {c.category_id: c.name for c in self.catalog.categories}
        assert names["FC1"] == "Failure of the machine components"
        assert names["FC2"] == "Failure of the process and workflow"
        assert names["FC3"] == "Failure at the human-machine interface"
        assert names["FC4"] == "Failure of the human component"
        assert names["FC5"] == "Exogenous circumstances"

    def test_mode_ids_unique_and_kebab_case(self):
        ids = [m.mode_id for c in self.catalog.categories for m in c.modes]
        assert len(set(ids)) == len(ids)
        for mode_id in ids:
            cat, slug = mode_id.split(".", 1)
            assert cat.startswith("FC")
            assert slug == slug.lower()
            assert " " not in slug and "--" not in slug

    def test_known_modes_present(self):
        for mode_id in ("FC2.delayed-notification", "FC5.unreasonable-laws",
                        "FC3.insufficient-training", "FC4.lacking-courage",
                        "FC4.fatigue", "FC1.unexpected-inputs-or-outputs",
                        "FC3.incomprehensible-or-incomplete-outputs"):
            assert self.catalog.mode(mode_id).mode_id == mode_id

    def test_catch_all_modes_not_ablatable(self):
        for cat in self.catalog.categories:
            others = [m for m in cat.modes if m.effect == "free_text"]
            assert others, f"{cat.category_id} has no catch-all mode"
            for m in others:
                assert not m.ablatable

    def test_every_category_has_an_effective_mode(self):
        for cat in self.catalog.categories:
            assert any(m.ablatable for m in cat.modes)

    def test_unknown_mode_raises(self):
        with pytest.raises(InjectionError):
            self.catalog.mode("FC9.nope")

    def test_json_shape(self):
        doc = self.catalog.to_json()
        assert len(doc["categories"]) == 5
        mode = doc["categories"][0]["modes"][0]
        assert set(mode) == {"mode_id", "name", "effect", "category_id", "params"}


class TestFaultInjection:
    def test_param_validation(self):
        FaultInjection("FC2.delayed-notification", "workflow",
                       {"stage": "warn", "delay": 2.0})
        with pytest.raises(InjectionError):
            FaultInjection("FC2.delayed-notification", "workflow", {"stage": "warn"})
        with pytest.raises(InjectionError):
            FaultInjection("FC2.delayed-notification", "workflow",
                           {"stage": "warn", "delay": 2.0, "bogus": 1})

    def test_target_validation(self):
        with pytest.raises(InjectionError):
            FaultInjection("FC2.delayed-notification", "oracle",
                           {"stage": "warn", "delay": 2.0})
        with pytest.raises(InjectionError):
            FaultInjection("FC4.fatigue", "spacecraft", {})

    def test_json_roundtrip(self):
        f = FaultInjection("FC1.unexpected-inputs-or-outputs", "workflow",
                           {"event": "detection", "labels": ("a", "b"), "dwell": 2.0})
        assert FaultInjection.from_json(f.to_json()) == f

    def test_hashable_and_order_insensitive(self):
        a = FaultInjection("FC2.insufficient-reaction-time", "oracle", {"delay": 1.0})
        b = FaultInjection("FC2.insufficient-reaction-time", "oracle", {"delay": 1.0})
        assert a == b and hash(a) == hash(b)


ECHO = {
    "name": "echo", "alphabet": ["0", "1"], "max_answer_len": 1,
    "inputs": [], "vars": [{"name": "a", "domain": {"kind": "word"}}],
    "entry": "q",
    "nodes": {
        "q": {"kind": "query", "prompt": '"1"', "bind": "a", "next": "h"},
        "h": {"kind": "halt", "output": "a"},
    },
}


class TestInject:
    def test_prompt_truncation_wraps_machine(self):
        machine = spec_from_json(ECHO)
        fault = FaultInjection("FC3.incomprehensible-or-incomplete-outputs",
                               "machine", {"keep": 0})
        wrapped = inject(machine, fault)
        effect = wrapped.step(wrapped.initial_config({}))
        assert isinstance(effect, Query)
        assert effect.prompt == ""
        assert wrapped.spec_hash() != machine.spec_hash()

    def test_oracle_delay_wraps_oracle(self):
        fault = FaultInjection("FC2.insufficient-reaction-time", "oracle",
                               {"delay": 3.5})
        oracle = inject(ConstantOracle("1"), fault)
        assert oracle.answer("p", QueryContext()) == "1"
        assert oracle.response_delay("p", QueryContext()) == pytest.approx(3.5)

    def test_human_override_needs_stochastic_human(self):
        fault = FaultInjection("FC4.fatigue", "oracle", {"eps0": 0.5})
        with pytest.raises(InjectionError):
            inject(ConstantOracle("1"), fault)
        human = stochastic_human(HumanModelParams(), seed=1)
        assert inject(human, fault).params.fatigue.eps0 == 0.5

    def test_annotation_is_inert(self):
        fault = FaultInjection("FC4.stress-or-overload", "oracle", {})
        oracle = ConstantOracle("1")
        assert inject(oracle, fault) is oracle

    def test_scenario_injection_appends_fault(self):
        scenario = _deadline_scenario()
        fault = FaultInjection("FC2.delayed-notification", "workflow",
                               {"stage": "warn", "delay": 1.0})
        assert inject(scenario, fault).faults[-1] is fault

    def test_mismatched_effect_and_target_rejected(self):
        machine = spec_from_json(ECHO)
        fault = FaultInjection("FC2.insufficient-reaction-time", "oracle",
                               {"delay": 1.0})
        with pytest.raises(InjectionError):
            inject(machine, fault)


def _deadline_scenario(faults=(), reaction=0.5, lead=1.0, human=None):
    """Warn at t=1.0, impact at 1.0+lead; averted iff answered by impact."""
    return TimedScenario(
        name="deadline",
        timeline=((1.0, "warning"), (1.0 + lead, "impact")),
        stages=(
            {"id": "warn", "kind": "notify", "at": "warning"},
            {"id": "act", "kind": "respond", "prompt": "1"},
        ),
        human=human or HumanModelParams(reaction=ReactionTime(value=reaction)),
        intent="1",
        faults=tuple(faults),
        harm=HarmRule(kind="deadline_miss", deadline_event="impact",
                      response_stage="act"),
    )


class TestTimedScenarioValidation:
    def test_timeline_must_be_sorted(self):
        with pytest.raises(ScenarioError):
            TimedScenario(name="x", timeline=((2.0, "b"), (1.0, "a")), stages=(),
                          human=HumanModelParams(), intent="1", faults=(),
                          harm=HarmRule(kind="threshold", limit=1.0))

    def test_duplicate_stage_ids_rejected(self):
        with pytest.raises(ScenarioError):
            TimedScenario(name="x", timeline=(),
                          stages=({"id": "s", "kind": "fixed", "duration": 1.0},
                                  {"id": "s", "kind": "fixed", "duration": 1.0}),
                          human=HumanModelParams(), intent="1", faults=(),
                          harm=HarmRule(kind="threshold", limit=1.0))

    def test_harm_rule_references_checked(self):
        with pytest.raises(ScenarioError):
            TimedScenario(name="x", timeline=((0.0, "go"),),
                          stages=({"id": "s", "kind": "fixed", "duration": 1.0},),
                          human=HumanModelParams(), intent="1", faults=(),
                          harm=HarmRule(kind="deadline_miss",
                                        deadline_event="nope", response_stage="s"))

    def test_fault_stage_references_checked(self):
        fault = FaultInjection("FC2.delayed-notification", "workflow",
                               {"stage": "ghost", "delay": 1.0})
        with pytest.raises(ScenarioError):
            _deadline_scenario(faults=[fault])

    def test_unknown_harm_kind_rejected(self):
        with pytest.raises(ScenarioError):
            HarmRule.from_json({"kind": "vibes"})

    def test_json_roundtrip(self):
        scenario = _deadline_scenario(faults=[
            FaultInjection("FC2.delayed-notification", "workflow",
                           {"stage": "warn", "delay": 1.0})])
        assert TimedScenario.from_json(scenario.to_json()) == scenario


class TestSimulateTimed:
    def test_averted_when_response_fits(self):
        trial = simulate_timed(_deadline_scenario(reaction=0.5, lead=1.0), seed=1)
        assert trial.outcome == AVERTED
        assert trial.final_time == pytest.approx(1.5)
        assert trial.answers == ("1",)

    def test_harm_when_response_late(self):
        trial = simulate_timed(_deadline_scenario(reaction=1.5, lead=1.0), seed=1)
        assert trial.outcome == HARM

    def test_response_on_deadline_is_averted(self):
        trial = simulate_timed(_deadline_scenario(reaction=1.0, lead=1.0), seed=1)
        assert trial.outcome == AVERTED

    @given(reaction=st.floats(min_value=0.0, max_value=3.0,
                              allow_nan=False, allow_infinity=False),
           lead=st.floats(min_value=0.01, max_value=3.0,
                          allow_nan=False, allow_infinity=False))
    def test_deadline_grid(self, reaction, lead):
        trial = simulate_timed(_deadline_scenario(reaction=reaction, lead=lead),
                               seed=1)
        assert trial.outcome == (AVERTED if reaction <= lead else HARM)

    def test_stage_delay_pushes_past_deadline(self):
        fault = FaultInjection("FC2.delayed-notification", "workflow",
                               {"stage": "warn", "delay": 5.0})
        trial = simulate_timed(_deadline_scenario(faults=[fault]), seed=1)
        assert trial.outcome == HARM
        assert "FC2.delayed-notification" in trial.triggered_modes

    def test_suppressed_terminal_stage_skipped(self):
        scenario = TimedScenario(
            name="auto",
            timeline=((0.0, "go"),),
            stages=(
                {"id": "autofix", "kind": "auto", "at": "go", "terminal": True},
                {"id": "act", "kind": "respond", "prompt": "1"},
            ),
            human=HumanModelParams(reaction=ReactionTime(value=2.0)),
            intent="1", faults=(),
            harm=HarmRule(kind="threshold", limit=1.0))
        assert simulate_timed(scenario, seed=1).outcome == AVERTED
        fault = FaultInjection("FC5.unreasonable-laws", "workflow",
                               {"stage": "autofix"})
        suppressed = inject(scenario, fault)
        trial = simulate_timed(suppressed, seed=1)
        assert trial.outcome == HARM
        assert trial.stage_times[0][0] == "act"

    def test_stop_answer_aborts_trial(self):
        scenario = _deadline_scenario(human=HumanModelParams(courage=1.0))
        scenario = TimedScenario.from_json(
            scenario.to_json() | {"stages": [
                {"id": "warn", "kind": "notify", "at": "warning"},
                {"id": "act", "kind": "respond", "prompt": "1", "hazard": True},
            ]})
        trial = simulate_timed(scenario, seed=1)
        assert trial.outcome == ABORTED
        assert trial.answers == ("!",)

    def test_wrong_answer_rule(self):
        scenario = TimedScenario(
            name="judge", timeline=(),
            stages=({"id": "act", "kind": "respond", "prompt": "p"},),
            human=HumanModelParams(), intent="1", faults=(),
            harm=HarmRule(kind="wrong_answer", intent="1"))
        assert simulate_timed(scenario, seed=1).outcome == COMPLETED
        off_intent = TimedScenario.from_json(scenario.to_json() | {"intent": "0"})
        assert simulate_timed(off_intent, seed=1).outcome == HARM

    def test_event_rewrite_shifts_deadline(self):
        fault = FaultInjection(
            "FC1.unexpected-inputs-or-outputs", "workflow",
            {"event": "impact", "labels": ("car", "other"), "dwell": 0.5,
             "shift": -1.5})
        trial = simulate_timed(_deadline_scenario(faults=[fault]), seed=1)
        # impact moved from 2.0 to 0.5; the 1.5s response now misses it
        assert trial.outcome == HARM
        assert trial.rewrites == (("impact", ("car", "other")),)

    def test_deterministic_per_seed(self):
        scenario = _deadline_scenario(
            human=HumanModelParams(reaction=ReactionTime(value=0.2),
                                   fatigue=Fatigue(eps0=0.3)))
        assert simulate_timed(scenario, 99) == simulate_timed(scenario, 99)


class TestWilsonInterval:
    def test_brackets_the_point_estimate(self):
        lo, hi = wilson_interval(30, 100)
        assert lo < 0.3 < hi
        assert 0.0 <= lo <= hi <= 1.0

    def test_degenerate_cases(self):
        assert wilson_interval(0, 0) == (0.0, 1.0)
        lo, hi = wilson_interval(0, 50)
        assert lo == 0.0 and hi > 0.0
        lo, hi = wilson_interval(50, 50)
        assert hi == 1.0 and lo < 1.0

    @given(n=st.integers(min_value=1, max_value=10_000),
           k=st.integers(min_value=0, max_value=10_000))
    def test_interval_always_valid(self, n, k):
        k = min(k, n)
        lo, hi = wilson_interval(k, n)
        assert 0.0 <= lo <= hi <= 1.0
        assert lo <= k / n + 1e-12 and k / n - 1e-12 <= hi

    def test_narrows_with_n(self):
        lo1, hi1 = wilson_interval(10, 100)
        lo2, hi2 = wilson_interval(1000, 10_000)
        assert hi2 - lo2 < hi1 - lo1


class TestMonteCarlo:
    def test_rates_sum_to_one(self):
        scenario = _deadline_scenario(
            human=HumanModelParams(reaction=ReactionTime.from_json(
                {"kind": "uniform", "low": 0.5, "high": 1.5})))
        _records, summary = monte_carlo(scenario, 500, master_seed=3)
        assert sum(c for _, c, _, _, _ in summary.rates) == 500
        assert math.isclose(sum(r for _, _, r, _, _ in summary.rates), 1.0)

    def test_same_master_seed_identical(self):
        scenario = _deadline_scenario(
            human=HumanModelParams(reaction=ReactionTime.from_json(
                {"kind": "uniform", "low": 0.5, "high": 1.5})))
        r1, s1 = monte_carlo(scenario, 200, master_seed=3)
        r2, s2 = monte_carlo(scenario, 200, master_seed=3)
        assert r1 == r2 and s1 == s2

    def test_trial_seeds_are_order_independent(self):
        from loopscope.rng import derive_seed

        scenario = _deadline_scenario(
            human=HumanModelParams(reaction=ReactionTime.from_json(
                {"kind": "uniform", "low": 0.5, "high": 1.5})))
        records, _ = monte_carlo(scenario, 50, master_seed=3)
        # trial 17 recomputed standalone matches its batch record
        assert simulate_timed(scenario, derive_seed(3, 17)) == records[17]

    def test_zero_trials_rejected(self):
        with pytest.raises(ScenarioError):
            monte_carlo(_deadline_scenario(), 0, 0)

    def test_single_trial_notes_degeneracy(self):
        _r, summary = monte_carlo(_deadline_scenario(), 1, 0)
        assert any("single trial" in n for n in summary.notes)


class TestAttribution:
    def test_decisive_fault_flips_outcome(self):
        fault = FaultInjection("FC2.delayed-notification", "workflow",
                               {"stage": "warn", "delay": 5.0})
        scenario = _deadline_scenario(faults=[fault])
        trial = simulate_timed(scenario, seed=1)
        assert trial.outcome == HARM
        results = dict(attribute(trial, scenario))
        assert results["FC2.delayed-notification"] is True

    def test_redundant_fault_not_decisive(self):
        # two overlapping delays; removing either still misses the deadline
        faults = [
            FaultInjection("FC2.delayed-notification", "workflow",
                           {"stage": "warn", "delay": 5.0}),
            FaultInjection("FC3.insufficient-training", "workflow",
                           {"stage": "act", "delay": 5.0}),
        ]
        scenario = _deadline_scenario(faults=faults)
        trial = simulate_timed(scenario, seed=1)
        results = dict(attribute(trial, scenario))
        assert results == {"FC2.delayed-notification": False,
                           "FC3.insufficient-training": False}

    def test_free_text_faults_skipped(self):
        fault = FaultInjection("FC2.other-process-and-workflow-failures",
                               "workflow", {"description": "unmodelled"})
        scenario = _deadline_scenario(faults=[fault])
        trial = simulate_timed(scenario, seed=1)
        assert attribute(trial, scenario) == []

    def test_summary_aggregates_decisive_counts(self):
        fault = FaultInjection("FC2.delayed-notification", "workflow",
                               {"stage": "warn", "delay": 5.0})
        scenario = _deadline_scenario(faults=[fault])
        _r, summary = monte_carlo(scenario, 20, master_seed=0)
        assert summary.attribution == (
            ("FC2.delayed-notification", "FC2", 20),)
