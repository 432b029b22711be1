"""Built-in fixtures with golden expected results.

Each fixture ships as a JSON payload (a machine spec or a timed
scenario) plus a sibling ``.expected.json`` golden.  Every expected leaf
carries a provenance tag: "case-study" for values taken from the
documented incident material, "computed" for values frozen from an
independent calculation, "definitional" for values fixed by the fixture
itself.  ``verify_golden`` re-runs the relevant analysis and reports
field-level diffs, so the golden suite doubles as the regression gate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from ..engine import Limits, run
from ..errors import ScenarioError
from ..failures import TimedScenario, monte_carlo
from ..ir import spec_from_json
from ..oracles import ScriptedOracle, threshold_human
from ..tree import (
    build_tree,
    classify_effective,
    classify_setup,
    decisive_points,
    detect_real_queries,
    flatten_bounded_queries,
)

_PROVENANCE_TAGS = {"case-study", "computed", "definitional"}


@dataclass(frozen=True)
class ScenarioEntry:
    id: str
    kind: str  # classification-fixture | timed-scenario
    payload: object  # machine or TimedScenario
    expected: dict  # field -> {"value", "provenance"}
    raw: dict

    def expected_values(self):
        return {k: v["value"] for k, v in self.expected.items()}


@dataclass(frozen=True)
class GoldenResult:
    id: str
    passed: bool
    diffs: tuple  # {"field", "expected", "actual"}

    def to_json(self):
        return {"id": self.id, "passed": self.passed, "diffs": list(self.diffs)}


def _data_root():
    return resources.files(__package__) / "data"


def list_scenarios():
    ids = []
    for entry in _data_root().iterdir():
        name = entry.name
        if name.endswith(".json") and not name.endswith(".expected.json"):
            ids.append(name[: -len(".json")])
    return sorted(ids)


def load_scenario(scenario_id):
    root = _data_root()
    path = root / f"{scenario_id}.json"
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"unknown scenario id {scenario_id!r}") from None
    expected_path = root / f"{scenario_id}.expected.json"
    try:
        expected = json.loads(expected_path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario {scenario_id!r} is missing its golden file") from None
    for field_name, leaf in expected.items():
        if not (isinstance(leaf, dict) and "value" in leaf
                and leaf.get("provenance") in _PROVENANCE_TAGS):
            raise ScenarioError(
                f"golden field {field_name!r} of {scenario_id!r} lacks a provenance tag")
    kind = raw.get("kind")
    if kind == "classification-fixture":
        payload = spec_from_json(raw["payload"])
    elif kind == "timed-scenario":
        payload = TimedScenario.from_json(raw["payload"])
    else:
        raise ScenarioError(f"scenario {scenario_id!r} has unknown kind {kind!r}")
    return ScenarioEntry(id=raw.get("id", scenario_id), kind=kind, payload=payload,
                         expected=expected, raw=raw)


def verify_golden(scenario_id, limits=Limits()):
    entry = load_scenario(scenario_id)
    if entry.kind == "classification-fixture":
        diffs = _verify_classification(entry, limits)
    else:
        diffs = _verify_timed(entry)
    return GoldenResult(id=entry.id, passed=not diffs, diffs=tuple(diffs))


def _diff(field_name, expected, actual):
    return {"field": field_name, "expected": expected, "actual": actual}


def _verify_classification(entry, limits):
    machine = entry.payload
    exp = entry.expected_values()
    diffs = []

    verdict = classify_setup(machine, limits)
    if "class" in exp and verdict.cls != exp["class"]:
        diffs.append(_diff("class", exp["class"], verdict.cls))
    if "conclusive" in exp and verdict.conclusive != exp["conclusive"]:
        diffs.append(_diff("conclusive", exp["conclusive"], verdict.conclusive))

    if "real_flags" in exp:
        for input in machine.input_domain():
            flags = detect_real_queries(build_tree(machine, input, limits)).real_flags()
            if flags != exp["real_flags"]:
                diffs.append(_diff("real_flags", exp["real_flags"],
                                   {"input": input, "flags": flags}))
                break

    if "decisive" in exp:
        spec = exp["decisive"]
        oracle = ScriptedOracle(spec["script"])
        trace = run(machine, spec["input"], oracle, limits=limits)
        points = decisive_points(trace, machine, oracle, limits=limits)
        if points != spec["points"]:
            diffs.append(_diff("decisive.points", spec["points"], points))

    if "flatten" in exp:
        spec = exp["flatten"]
        result = flatten_bounded_queries(machine, limits)
        if result.ok != spec["ok"]:
            diffs.append(_diff("flatten.ok", spec["ok"], result.ok))
        elif result.ok:
            cases = result.certificate.cases if result.certificate else 0
            if cases != spec.get("cases", cases):
                diffs.append(_diff("flatten.cases", spec["cases"], cases))
        else:
            actual_index = (result.witness or {}).get("query_index")
            if actual_index != spec.get("witness_query_index"):
                diffs.append(_diff("flatten.witness_query_index",
                                   spec.get("witness_query_index"), actual_index))

    if "effective" in exp:
        spec = exp["effective"]
        oracle = threshold_human(spec["threshold"], spec["accept"], spec["reject"],
                                 machine.alphabet)
        ev = classify_effective(machine, oracle, limits)
        if ev.effective_cls != spec["class"]:
            diffs.append(_diff("effective.class", spec["class"], ev.effective_cls))
        total = ev.table.total_single_valued()
        if total != spec["total_single_valued"]:
            diffs.append(_diff("effective.total_single_valued",
                               spec["total_single_valued"], total))
    return diffs


def _verify_timed(entry):
    scenario = entry.payload
    exp = entry.expected_values()
    diffs = []
    records, summary = monte_carlo(scenario, exp["trials"], exp["master_seed"])

    for outcome, rate in exp.get("rates_exact", {}).items():
        actual = summary.rate_of(outcome)
        if actual != rate:
            diffs.append(_diff(f"rates_exact.{outcome}", rate, actual))
    for outcome, (low, high) in exp.get("rate_within", {}).items():
        actual = summary.rate_of(outcome)
        if not low <= actual <= high:
            diffs.append(_diff(f"rate_within.{outcome}", [low, high], actual))

    decisive = sorted(m for m, _cat, n in summary.attribution if n > 0)
    if "decisive_modes" in exp and decisive != sorted(exp["decisive_modes"]):
        diffs.append(_diff("decisive_modes", sorted(exp["decisive_modes"]), decisive))
    for mode_id in exp.get("non_decisive_modes", []):
        if mode_id in decisive:
            diffs.append(_diff("non_decisive_modes", mode_id, "decisive"))

    if "final_time" in exp:
        actual = records[0].final_time
        if abs(actual - exp["final_time"]) > 1e-9:
            diffs.append(_diff("final_time", exp["final_time"], actual))
    return diffs
