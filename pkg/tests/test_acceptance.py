"""Acceptance gate: one test per headline criterion.

Run with ``pytest -v tests/test_acceptance.py`` to get one pass/fail line
per criterion.  Each test is self-contained and uses only the public
package API plus the CLI.
"""

import json
import time
from dataclasses import replace

import pytest
from click.testing import CliRunner

from loopscope.cli import main as cli_main
from loopscope.engine import HALT, Limits, replay, run
from loopscope.failures import monte_carlo
from loopscope.ir import spec_from_json
from loopscope.oracles import (
    HumanModelParams,
    ReactionTime,
    ScriptedOracle,
    threshold_human,
)
from loopscope.scenarios import load_scenario, verify_golden
from loopscope.tree import (
    build_tree,
    classify_effective,
    classify_setup,
    detect_real_queries,
    flatten_bounded_queries,
    iter_query_nodes,
)

from randspec import random_machine
from test_tree import _AbortPadded


def _fixture(scenario_id):
    return load_scenario(scenario_id).payload


def test_parity_real_query_pair_under_one_second():
    started = time.perf_counter()
    parity = _fixture("parity")
    flags = detect_real_queries(build_tree(parity, {})).real_flags()
    assert flags == [False, True]
    omitted = _fixture("parity-omitted")
    flags = detect_real_queries(build_tree(omitted, {})).real_flags()
    assert flags == [False]
    assert time.perf_counter() - started < 1.0


def test_route_triple_classification_under_five_seconds():
    started = time.perf_counter()
    expected = {"route-trivial": "TrivialMonitoring",
                "route-endpoint": "EndpointAction",
                "route-involved": "InvolvedInteraction"}
    for scenario_id, cls in expected.items():
        verdict = classify_setup(_fixture(scenario_id))
        assert verdict.cls == cls, scenario_id
        assert verdict.conclusive, scenario_id
    assert time.perf_counter() - started < 5.0


def test_abort_exclusion_on_100_random_specs():
    passed = 0
    for seed in range(100):
        machine = random_machine(seed)
        base_tree = build_tree(machine, {})
        padded_tree = build_tree(_AbortPadded(machine), {})
        base = detect_real_queries(base_tree)
        padded = detect_real_queries(padded_tree)
        outputs_base = {(path, n.query_index): n.outputs
                        for path, n in iter_query_nodes(base_tree)}
        outputs_padded = {(path, n.query_index): n.outputs
                          for path, n in iter_query_nodes(padded_tree)}
        real_base = {(e.path, e.query_index): e.is_real for e in base.entries}
        real_padded = {(e.path, e.query_index): e.is_real for e in padded.entries}
        if (outputs_base == outputs_padded and real_base == real_padded
                and base_tree.outputs == padded_tree.outputs):
            passed += 1
    assert passed == 100


def test_flattening_equivalence_and_witness():
    series = flatten_bounded_queries(_fixture("btt-series"))
    assert series.ok
    assert series.certificate.equal
    # 3 binary questions: all 2^3 answer strategies, over every input
    assert series.certificate.cases == 8
    assert set(series.mapping) == {"".join(bits) for bits in
                                   __import__("itertools").product("01", repeat=3)}

    involved = flatten_bounded_queries(_fixture("route-involved"))
    assert not involved.ok
    assert involved.witness is not None
    assert involved.witness["query_index"] == 1
    assert "depends on earlier answers" in involved.witness["reason"]


def test_schufa_slip_back_to_trivial_monitoring():
    machine = _fixture("schufa-threshold")
    assert classify_setup(machine).cls == "EndpointAction"
    oracle = threshold_human(4, "1", "0", machine.alphabet)
    verdict = classify_effective(machine, oracle)
    assert verdict.standalone.cls == "EndpointAction"
    assert verdict.effective_cls == "TrivialMonitoring"
    assert verdict.table.total_single_valued()


def _uber_with_reaction(scenario, reaction):
    human = replace(scenario.human, reaction=ReactionTime(value=reaction))
    return replace(scenario, human=human)


def test_uber_forced_endpoints():
    scenario = load_scenario("uber-timeline").payload
    # shipped faults: the warning lands 0.2 s before impact
    events = dict((label, t) for t, label in scenario.timeline)
    assert events["impact"] - events["warning"] == pytest.approx(0.2)

    # any reaction beyond the 0.2 s lead misses the deadline on every trial;
    # answering exactly on the deadline counts as averted, so the grid stays
    # strictly above the lead
    for reaction in (0.201, 0.5, 1.2):
        _r, summary = monte_carlo(_uber_with_reaction(scenario, reaction),
                                  10_000, master_seed=7, attribute_trials=False)
        assert summary.rate_of("averted") == 0.0, reaction
        assert summary.rate_of("harm") == 1.0, reaction

    # warning moved to first detection: 5.6 s of lead, attentive human,
    # fixed 1.2 s reaction -> always in time
    delayed = next(f for f in scenario.faults
                   if f.mode_id == "FC2.delayed-notification")
    moved = scenario.without_fault(delayed)
    assert moved.human.attention.p_distract == 0.0
    _r, summary = monte_carlo(_uber_with_reaction(moved, 1.2),
                              10_000, master_seed=7, attribute_trials=False)
    assert summary.rate_of("averted") == 1.0


def test_determinism_cli_byte_identical_and_replay_identity():
    runner = CliRunner()
    args = ["simulate", "--scenario", "fatigue-bernoulli",
            "--trials", "10000", "--seed", "7"]
    first = runner.invoke(cli_main, args)
    second = runner.invoke(cli_main, args)
    assert first.exit_code == 0 and second.exit_code == 0
    assert first.output == second.output

    for seed in range(50):
        machine = random_machine(seed)
        script = ["1" if (seed >> i) & 1 else "0" for i in range(4)]
        trace = run(machine, {}, ScriptedOracle(script))
        assert replay(trace, machine) == trace, seed


def test_stochastic_rate_sanity_94_of_100_seeds():
    scenario = load_scenario("fatigue-bernoulli").payload
    within = 0
    for master_seed in range(100):
        _r, summary = monte_carlo(scenario, 10_000, master_seed,
                                  attribute_trials=False)
        if abs(summary.rate_of("harm") - 0.1) <= 0.01:
            within += 1
    assert within >= 94


def test_performance_deep_tree_and_golden_suite():
    # 4 queries over an 8-symbol alphabet: 9 word answers per node
    symbols = [str(d) for d in range(8)]
    nodes = {}
    for i in range(4):
        nodes[f"q{i}"] = {"kind": "query", "prompt": f'"{i}"', "bind": f"a{i}",
                          "next": f"q{i + 1}" if i < 3 else "h"}
    nodes["h"] = {"kind": "halt",
                  "output": "concat(concat(a0, a1), concat(a2, a3))"}
    machine = spec_from_json({
        "name": "deep", "alphabet": symbols, "max_answer_len": 1,
        "inputs": [],
        "vars": [{"name": f"a{i}", "domain": {"kind": "word"}} for i in range(4)],
        "entry": "q0", "nodes": nodes,
    })
    started = time.perf_counter()
    tree = build_tree(machine, {})
    report = detect_real_queries(tree)
    assert time.perf_counter() - started < 1.0
    assert len(report.real_flags()) == 4
    assert len(tree.outputs) == 9  # one symbol survives the length cap

    started = time.perf_counter()
    from loopscope.scenarios import list_scenarios
    for scenario_id in list_scenarios():
        assert verify_golden(scenario_id).passed, scenario_id
    assert time.perf_counter() - started < 30.0


def test_truncation_soundness_on_50_random_specs():
    stable = 0
    for seed in range(50):
        machine = random_machine(seed)
        small = classify_setup(machine, Limits(max_steps=10_000, max_tree_nodes=40))
        if small.conclusive:
            large = classify_setup(machine, Limits())
            if small.cls == large.cls and large.conclusive:
                stable += 1
        else:
            stable += 1  # inconclusive verdicts make no claim to preserve
    assert stable == 50
