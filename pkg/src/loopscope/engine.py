"""Runs a machine against an oracle strategy and records a replayable trace.

A run iterates single steps; Query effects consult the oracle, a STOP
answer aborts, and exceeding the step or query limits yields the
StepLimit outcome (an analysis artifact, distinct from the human's
abort).  Composing a machine with a deterministic oracle over its finite
input domain gives the effective input-to-outcome function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DomainError, ReplayError
from .ir import Abort, Continue, Halt, Query, STOP
from .oracles import QueryContext, ScriptedOracle

HALT = "halt"
ABORT = "abort"
STEP_LIMIT = "step_limit"


@dataclass(frozen=True)
class Limits:
    max_steps: int = 10_000
    max_tree_nodes: int = 1_000_000
    max_queries: int = 64

    def __post_init__(self):
        if min(self.max_steps, self.max_tree_nodes, self.max_queries) < 1:
            raise DomainError("all limits must be positive")

    def to_json(self):
        return {"max_steps": self.max_steps, "max_tree_nodes": self.max_tree_nodes,
                "max_queries": self.max_queries}

    @classmethod
    def from_json(cls, obj):
        return cls(max_steps=obj.get("max_steps", 10_000),
                   max_tree_nodes=obj.get("max_tree_nodes", 1_000_000),
                   max_queries=obj.get("max_queries", 64))


@dataclass(frozen=True)
class QueryRecord:
    prompt: str
    answer: object  # word or STOP
    query_index: int
    issued_at: float
    answered_at: float

    def to_json(self):
        answer = "!" if self.answer is STOP else self.answer
        stop = self.answer is STOP
        return {"prompt": self.prompt, "answer": answer, "stop": stop,
                "query_index": self.query_index,
                "issued_at": self.issued_at, "answered_at": self.answered_at}


@dataclass(frozen=True)
class Trace:
    spec_hash: str
    input: dict
    events: tuple  # (step_no, summary) pairs
    queries: tuple  # QueryRecord
    outcome: str  # HALT | ABORT | STEP_LIMIT
    output: str | None
    seed: object = None

    @property
    def segments(self):
        """Step counts of black-box segments between consecutive queries.

        Includes the opening segment before the first query and the
        closing segment after the last query (when the run halted).
        """
        marks = []
        last = 0
        for q in self.queries:
            step_at = next(step for step, kind in self.events
                           if kind == f"query:{q.query_index}")
            marks.append(step_at - last)
            last = step_at
        final_step = self.events[-1][0] if self.events else 0
        marks.append(final_step - last)
        return marks

    def to_jsonl(self):
        lines = [json.dumps({"spec_hash": self.spec_hash, "input": self.input,
                             "seed": self.seed}, sort_keys=True)]
        for step, kind in self.events:
            lines.append(json.dumps({"step": step, "event": kind}, sort_keys=True))
        for q in self.queries:
            lines.append(json.dumps({"query": q.to_json()}, sort_keys=True))
        lines.append(json.dumps({"outcome": self.outcome, "output": self.output},
                                sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text):
        lines = [json.loads(l) for l in text.splitlines() if l.strip()]
        header = lines[0]
        events, queries, outcome, output = [], [], None, None
        for obj in lines[1:]:
            if "event" in obj:
                events.append((obj["step"], obj["event"]))
            elif "query" in obj:
                q = obj["query"]
                queries.append(QueryRecord(
                    prompt=q["prompt"],
                    answer=STOP if q.get("stop") else q["answer"],
                    query_index=q["query_index"],
                    issued_at=q["issued_at"], answered_at=q["answered_at"]))
            elif "outcome" in obj:
                outcome, output = obj["outcome"], obj.get("output")
        return cls(spec_hash=header["spec_hash"], input=header["input"],
                   events=tuple(events), queries=tuple(queries),
                   outcome=outcome, output=output, seed=header.get("seed"))


def run(machine, input, oracle, limits=Limits(), dt=0.0, seed=None):
    """Run to completion, consulting the oracle at each query."""
    machine.validate_input(input)
    config = machine.initial_config(input)
    events = []
    queries = []
    while True:
        if config.steps_taken >= limits.max_steps:
            events.append((config.steps_taken, "step_limit"))
            return Trace(machine.spec_hash(), input, tuple(events), tuple(queries),
                         STEP_LIMIT, None, seed)
        effect = machine.step(config)
        if isinstance(effect, Continue):
            config = effect.config
            continue
        if isinstance(effect, Halt):
            events.append((config.steps_taken, "halt"))
            return Trace(machine.spec_hash(), input, tuple(events), tuple(queries),
                         HALT, effect.output, seed)
        if isinstance(effect, Abort):
            events.append((config.steps_taken, "abort"))
            return Trace(machine.spec_hash(), input, tuple(events), tuple(queries),
                         ABORT, None, seed)
        # Query
        qindex = config.queries_asked
        if qindex >= limits.max_queries:
            events.append((config.steps_taken, "step_limit"))
            return Trace(machine.spec_hash(), input, tuple(events), tuple(queries),
                         STEP_LIMIT, None, seed)
        issued_at = config.steps_taken * dt
        context = QueryContext(query_index=qindex, elapsed_time=issued_at,
                               suggested_default=effect.default,
                               hazard_flag=effect.hazard)
        answer = oracle.answer(effect.prompt, context)
        answered_at = issued_at + oracle.response_delay(effect.prompt, context)
        events.append((config.steps_taken, f"query:{qindex}"))
        queries.append(QueryRecord(effect.prompt, answer, qindex, issued_at, answered_at))
        resumed = effect.resume(answer)
        if isinstance(resumed, Abort):
            events.append((config.steps_taken, "abort"))
            return Trace(machine.spec_hash(), input, tuple(events), tuple(queries),
                         ABORT, None, seed)
        config = resumed.config


def scripted_from_trace(trace):
    answers = [q.answer for q in trace.queries]
    return ScriptedOracle(answers) if answers else ScriptedOracle([""])


class _TraceOracle(ScriptedOracle):
    """Scripted oracle that also reproduces the recorded response delays."""

    def __init__(self, trace):
        super().__init__([q.answer for q in trace.queries] or [""])
        self._delays = [q.answered_at - q.issued_at for q in trace.queries]

    def response_delay(self, prompt, context):
        if context.query_index < len(self._delays):
            return self._delays[context.query_index]
        return 0.0


def replay(trace, machine, limits=Limits(), dt=0.0):
    """Re-run from the trace's recorded answers; must reproduce it exactly."""
    if trace.spec_hash != machine.spec_hash():
        raise ReplayError(
            f"trace was recorded against spec {trace.spec_hash[:12]}, "
            f"machine is {machine.spec_hash()[:12]}")
    return run(machine, trace.input, _TraceOracle(trace), limits=limits, dt=dt,
               seed=trace.seed)


@dataclass(frozen=True)
class EffectiveTable:
    """Input-to-outcome table of the machine composed with a fixed oracle."""

    entries: tuple  # of (input, outcome, output)
    partial: bool  # True when some input hit the step limit

    def outcomes(self):
        return {json.dumps(i, sort_keys=True): (oc, out) for i, oc, out in self.entries}

    def total_single_valued(self):
        """True when every input yields exactly one Halt output."""
        return not self.partial and all(oc == HALT for _, oc, _ in self.entries)

    def to_json(self):
        return {"partial": self.partial,
                "entries": [{"input": i, "outcome": oc, "output": out}
                            for i, oc, out in self.entries]}


def effective_function(machine, oracle, limits=Limits()):
    """Exhaustively run every input against a deterministic oracle."""
    if not oracle.deterministic:
        raise DomainError("effective_function requires a deterministic oracle")
    entries = []
    partial = False
    for input in machine.input_domain():
        trace = run(machine, input, oracle, limits=limits)
        partial = partial or trace.outcome == STEP_LIMIT
        entries.append((input, trace.outcome, trace.output))
    return EffectiveTable(tuple(entries), partial)
