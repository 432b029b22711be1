"""Laboratory for human-in-the-loop computational setups.

Define a machine that may consult a human oracle, then: enumerate its
full computation tree over the bounded answer space, find the queries
whose answers actually matter, classify the setup, stress it with
injected failure modes in seeded Monte Carlo, or drive it live with a
real human over a wire protocol.
"""

from .engine import ABORT, HALT, Limits, STEP_LIMIT, Trace, effective_function, replay, run
from .errors import (
    DomainError,
    ExprError,
    InjectionError,
    LoopscopeError,
    ReplayError,
    ScenarioError,
    SessionError,
    SpecError,
)
from .failures import (
    FaultInjection,
    TimedScenario,
    attribute,
    inject,
    load_taxonomy,
    monte_carlo,
    simulate_timed,
)
from .ir import STOP, Alphabet, parse_spec, spec_from_json
from .oracles import (
    HumanModelParams,
    constant_answer,
    scripted_answer,
    stochastic_human,
    threshold_human,
)
from .scenarios import list_scenarios, load_scenario, verify_golden
from .tree import (
    build_tree,
    classify_effective,
    classify_setup,
    decisive_points,
    detect_real_queries,
    flatten_bounded_queries,
    functions_equal,
    trace_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "ABORT", "HALT", "STEP_LIMIT", "STOP",
    "Alphabet", "DomainError", "ExprError", "FaultInjection", "HumanModelParams",
    "InjectionError", "Limits", "LoopscopeError", "ReplayError", "ScenarioError",
    "SessionError", "SpecError", "TimedScenario", "Trace",
    "attribute", "build_tree", "classify_effective", "classify_setup",
    "constant_answer", "decisive_points", "detect_real_queries",
    "effective_function", "flatten_bounded_queries", "functions_equal", "inject",
    "list_scenarios", "load_scenario", "load_taxonomy", "monte_carlo", "parse_spec",
    "replay", "run", "scripted_answer", "simulate_timed", "spec_from_json",
    "stochastic_human", "threshold_human", "trace_metrics", "verify_golden",
]
