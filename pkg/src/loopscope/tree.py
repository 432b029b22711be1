"""Exhaustive computation-tree analysis over the bounded answer space.

Builds the full tree of oracle-answer branches for an input, detects real
queries (a fork whose branches do not all share one output set, with
abort branches excluded), classifies the human-in-the-loop setup,
flattens predetermined question series into a single conglomerate query,
and computes counterfactual decisiveness of recorded answers.

All verdicts are scoped to the configured alphabet, answer length, and
limits; truncation is represented in the tree and poisons conclusiveness
instead of raising.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import DomainError, LoopscopeError
from .engine import ABORT, HALT, Limits, STEP_LIMIT, run
from .ir import Abort, Continue, Halt, Query, STOP
from .oracles import OracleStrategy, ScriptedOracle, enumeration_answers

HOOTL = "HOOTL"
TRIVIAL_MONITORING = "TrivialMonitoring"
ENDPOINT_ACTION = "EndpointAction"
INVOLVED_INTERACTION = "InvolvedInteraction"
INTERMEDIATE = "Intermediate"


# --- tree nodes --------------------------------------------------------------

@dataclass(frozen=True)
class TreeHalt:
    output: str
    fingerprint: str = field(compare=False, default="")

    kind = "halt"
    unknown = False

    @property
    def outputs(self):
        return frozenset([self.output])


@dataclass(frozen=True)
class TreeAbort:
    fingerprint: str = field(compare=False, default="abort")

    kind = "abort"
    unknown = False
    # Abort does not count towards the set of computational outcomes.
    outputs = frozenset()


@dataclass(frozen=True)
class TreeTruncated:
    fingerprint: str = field(compare=False, default="truncated")

    kind = "truncated"
    unknown = True
    outputs = frozenset()


@dataclass(frozen=True)
class TreeQuery:
    prompt: str
    step_depth: int  # machine steps taken when the query was issued
    query_index: int  # queries asked before this one on the path
    branches: tuple  # ordered (answer, subtree); answer STOP serialized last
    outputs: frozenset = field(compare=False)
    unknown: bool = field(compare=False)
    fingerprint: str = field(compare=False, default="")

    kind = "query"

    def word_branches(self):
        return [(a, sub) for a, sub in self.branches if a is not STOP]


def _fingerprint(payload):
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def _make_halt(output):
    return TreeHalt(output=output, fingerprint=_fingerprint(f"halt:{output}"))


def _make_query(prompt, step_depth, query_index, branches):
    outputs = frozenset().union(*(sub.outputs for _, sub in branches))
    unknown = any(sub.unknown for _, sub in branches)
    payload = "query:" + prompt + "|" + "|".join(
        f"{'!' if a is STOP else a}>{sub.fingerprint}" for a, sub in branches)
    return TreeQuery(prompt=prompt, step_depth=step_depth, query_index=query_index,
                     branches=branches, outputs=outputs, unknown=unknown,
                     fingerprint=_fingerprint(payload))


class _Budget:
    def __init__(self, max_nodes):
        self.remaining = max_nodes

    def take(self):
        if self.remaining <= 0:
            return False
        self.remaining -= 1
        return True


def build_tree(machine, input, limits=Limits()):
    """Exhaustively expand every query over the full bounded answer space."""
    machine.validate_input(input)
    answers = enumeration_answers(machine.alphabet, machine.max_answer_len)
    budget = _Budget(limits.max_tree_nodes)
    return _expand(machine, machine.initial_config(input), answers, budget, limits)


def _expand(machine, config, answers, budget, limits):
    if not budget.take():
        return TreeTruncated()
    while True:
        if config.steps_taken >= limits.max_steps:
            return TreeTruncated()
        effect = machine.step(config)
        if isinstance(effect, Continue):
            config = effect.config
            continue
        if isinstance(effect, Halt):
            return _make_halt(effect.output)
        if isinstance(effect, Abort):
            return TreeAbort()
        # Query
        if config.queries_asked >= limits.max_queries:
            return TreeTruncated()
        branches = []
        for answer in answers:
            resumed = effect.resume(answer)
            if isinstance(resumed, Abort):
                sub = TreeAbort()
            else:
                sub = _expand(machine, resumed.config, answers, budget, limits)
            branches.append((answer, sub))
        return _make_query(effect.prompt, config.steps_taken, config.queries_asked,
                           tuple(branches))


def iter_query_nodes(tree, path=()):
    """Yield (path-of-answers, TreeQuery) in depth-first enumeration order."""
    if isinstance(tree, TreeQuery):
        yield path, tree
        for answer, sub in tree.branches:
            if answer is not STOP:
                yield from iter_query_nodes(sub, path + (answer,))


def iter_leaf_paths(tree, path=()):
    """Yield (path-of-answers, leaf) for every root-to-leaf path."""
    if isinstance(tree, TreeQuery):
        for answer, sub in tree.branches:
            yield from iter_leaf_paths(sub, path + (answer,))
    else:
        yield path, tree


# --- real queries ------------------------------------------------------------

@dataclass(frozen=True)
class RealQueryEntry:
    path: tuple  # answers leading to this query node
    query_index: int
    prompt: str
    fork_exists: bool
    outputs_differ: bool
    is_real: bool
    conclusive: bool

    def to_json(self):
        return {"path": list(self.path), "query_index": self.query_index,
                "prompt": self.prompt, "fork_exists": self.fork_exists,
                "outputs_differ": self.outputs_differ, "is_real": self.is_real,
                "conclusive": self.conclusive}


@dataclass(frozen=True)
class RealQueryReport:
    entries: tuple
    by_index: tuple  # aggregated: index j real iff some node at index j is real
    conclusive: bool

    def real_flags(self):
        return list(self.by_index)

    def implication_holds(self):
        """Self-test: outputs_differ implies fork_exists on every node."""
        return all(e.fork_exists for e in self.entries if e.outputs_differ)

    def to_json(self):
        return {"entries": [e.to_json() for e in self.entries],
                "real_flags": list(self.by_index),
                "conclusive": self.conclusive}


def _relevant_branches(node):
    # Branches whose subtree can still produce an output.  Always-abort
    # subtrees are excluded like STOP: abort carries no output, so an
    # answer that can only abort never makes a query real.
    return [(a, sub) for a, sub in node.word_branches() if sub.outputs or sub.unknown]


def _classify_query_node(node):
    branches = _relevant_branches(node)
    fork_exists = len({sub.fingerprint for _, sub in branches}) >= 2
    outputs_differ = len({sub.outputs for _, sub in branches}) >= 2
    # Truncation below could flip either comparison.
    conclusive = not any(sub.unknown for _, sub in branches)
    return fork_exists, outputs_differ, conclusive


def detect_real_queries(tree):
    """Per query node: fork and output-set comparison over non-stop branches."""
    entries = []
    for path, node in iter_query_nodes(tree):
        fork_exists, outputs_differ, conclusive = _classify_query_node(node)
        entries.append(RealQueryEntry(
            path=path, query_index=node.query_index, prompt=node.prompt,
            fork_exists=fork_exists, outputs_differ=outputs_differ,
            is_real=fork_exists and outputs_differ, conclusive=conclusive))
    if entries:
        depth = max(e.query_index for e in entries) + 1
        by_index = tuple(
            any(e.is_real for e in entries if e.query_index == j) for j in range(depth))
    else:
        by_index = ()
    report = RealQueryReport(entries=tuple(entries), by_index=by_index,
                             conclusive=all(e.conclusive for e in entries))
    if not report.implication_holds():
        raise LoopscopeError("internal invariant violated: outputs differ without a fork")
    return report


# --- setup classification ----------------------------------------------------

@dataclass(frozen=True)
class SetupVerdict:
    cls: str
    evidence: tuple  # witness dicts
    census: tuple  # per input: {"input", "min_real", "max_real"}
    conclusive: bool
    abort_reachable: bool
    strict: bool
    notes: tuple = ()

    def to_json(self):
        return {"class": self.cls, "evidence": list(self.evidence),
                "census": list(self.census), "conclusive": self.conclusive,
                "abort_reachable": self.abort_reachable,
                "strict": self.strict, "notes": list(self.notes)}


def _real_lookup(report):
    return {(e.path, e.query_index): e.is_real for e in report.entries}


def _path_real_counts(tree, report):
    """Real-query count along each root-to-leaf path, abort paths excluded."""
    lookup = _real_lookup(report)

    def walk(node, path, count):
        if isinstance(node, TreeQuery):
            c = count + (1 if lookup[(path, node.query_index)] else 0)
            for answer, sub in node.branches:
                if answer is STOP:
                    continue
                yield from walk(sub, path + (answer,), c)
        elif isinstance(node, TreeAbort):
            return
        else:
            yield count, path, node

    return list(walk(tree, (), 0))


def _is_endpoint_input(tree, report, strict):
    """Every halt path: exactly one real query, asked last, answer echoed."""
    lookup = _real_lookup(report)
    if not any(True for _ in iter_query_nodes(tree)):
        return False
    for count, _path, leaf in _path_real_counts(tree, report):
        if leaf.kind == "truncated":
            return False
        if count != 1:
            return False
    # Each real query must be the final oracle call with each non-stop
    # branch landing on Halt(answer).  In lenient mode administrative
    # steps after the query are tolerated as long as the eventual halt
    # still outputs the answer verbatim.
    for path, node in iter_query_nodes(tree):
        if not lookup[(path, node.query_index)]:
            continue
        for answer, sub in _relevant_branches(node):
            if strict:
                if not (isinstance(sub, TreeHalt) and sub.output == answer):
                    return False
            else:
                target = sub
                while isinstance(target, TreeQuery):
                    return False
                if not (isinstance(target, TreeHalt) and target.output == answer):
                    return False
    return True


def classify_setup(machine, limits=Limits(), strict=True):
    """Decision procedure over the whole finite input domain."""
    inputs = machine.input_domain()
    trees = {}
    reports = {}
    for input in inputs:
        key = json.dumps(input, sort_keys=True)
        trees[key] = (input, build_tree(machine, input, limits))
        reports[key] = detect_real_queries(trees[key][1])

    conclusive = all(
        not _tree_has_truncation(t) for _, t in trees.values())
    queries_reachable = any(
        any(True for _ in iter_query_nodes(t)) for _, t in trees.values())

    census = []
    involved_witness = None
    for key, (input, tree) in trees.items():
        counts = [c for c, _, _ in _path_real_counts(tree, reports[key])]
        census.append({"input": input,
                       "min_real": min(counts) if counts else 0,
                       "max_real": max(counts) if counts else 0})
        if involved_witness is None:
            for c, path, _leaf in _path_real_counts(tree, reports[key]):
                if c >= 2:
                    involved_witness = {"input": input, "path": list(path),
                                        "real_queries": c}
                    break

    notes = []
    if not conclusive:
        notes.append("tree truncated at configured limits; verdict is inconclusive")

    def verdict(cls, evidence):
        return SetupVerdict(cls=cls, evidence=tuple(evidence), census=tuple(census),
                            conclusive=conclusive, abort_reachable=queries_reachable,
                            strict=strict, notes=tuple(notes))

    # Priority: involved > endpoint > trivial > HOOTL, then intermediate.
    if involved_witness is not None:
        return verdict(INVOLVED_INTERACTION, [involved_witness])

    if queries_reachable:
        endpoint_everywhere = all(
            _is_endpoint_input(tree, reports[key], strict)
            for key, (_, tree) in trees.items())
        if endpoint_everywhere:
            evidence = [{"input": input, "final_query": True}
                        for _, (input, _) in list(trees.items())[:3]]
            return verdict(ENDPOINT_ACTION, evidence)

        no_real = all(not e.is_real for r in reports.values() for e in r.entries)
        single_output = all(
            len(t.outputs) == 1 and not t.unknown for _, t in trees.values())
        if no_real and single_output:
            evidence = [{"input": input, "output": sorted(tree.outputs)[0]}
                        for _, (input, tree) in list(trees.items())[:3]]
            return verdict(TRIVIAL_MONITORING, evidence)
    else:
        return verdict(HOOTL, [{"reason": "no query reachable on any input"}])

    diag = []
    for key, (input, tree) in trees.items():
        report = reports[key]
        reals = [e for e in report.entries if e.is_real]
        diag.append({"input": input, "real_query_nodes": len(reals),
                     "outputs": sorted(tree.outputs)})
    notes.append("setup does not match any named class; see diagnostics")
    return verdict(INTERMEDIATE, diag[:5])


def _tree_has_truncation(tree):
    if isinstance(tree, TreeTruncated):
        return True
    if isinstance(tree, TreeQuery):
        return tree.unknown
    return False


# --- effective classification ------------------------------------------------

@dataclass(frozen=True)
class EffectiveVerdict:
    standalone: SetupVerdict
    effective_cls: str
    table: object  # EffectiveTable
    degenerate: bool
    notes: tuple = ()

    def to_json(self):
        return {"standalone": self.standalone.to_json(),
                "effective_class": self.effective_cls,
                "table": self.table.to_json(),
                "degenerate": self.degenerate,
                "notes": list(self.notes)}


def classify_effective(machine, oracle, limits=Limits(), strict=True):
    """Classify the machine composed with a fixed deterministic human.

    A total, single-valued composed table is trivial-monitoring
    equivalent behaviour regardless of the machine's standalone class.
    """
    from .engine import effective_function

    standalone = classify_setup(machine, limits, strict=strict)
    table = effective_function(machine, oracle, limits)
    all_abort = all(oc == ABORT for _, oc, _ in table.entries)
    notes = []
    if all_abort:
        notes.append("composition aborts on every input; classification degenerate")
        return EffectiveVerdict(standalone, "Inconclusive", table, True, tuple(notes))
    if table.total_single_valued():
        if standalone.cls != TRIVIAL_MONITORING:
            notes.append(
                f"standalone {standalone.cls} slipped back to trivial-monitoring behaviour "
                "under this oracle")
        return EffectiveVerdict(standalone, TRIVIAL_MONITORING, table, False, tuple(notes))
    notes.append("composed table is not total (abort or step-limit entries present)")
    return EffectiveVerdict(standalone, "NonTotal", table, False, tuple(notes))


# --- flattening a bounded question series ------------------------------------

@dataclass(frozen=True)
class FlattenResult:
    ok: bool
    machine: object = None
    mapping: dict | None = None  # flattened answer -> tuple of original answers
    certificate: object = None  # EquivalenceResult
    witness: dict | None = None
    unchanged: bool = False

    def to_json(self):
        return {"ok": self.ok, "unchanged": self.unchanged,
                "witness": self.witness,
                "certificate": self.certificate.to_json() if self.certificate else None}


@dataclass(frozen=True)
class EquivalenceResult:
    equal: bool
    cases: int
    witness: dict | None = None

    def to_json(self):
        return {"equal": self.equal, "cases": self.cases, "witness": self.witness}


class FlattenedConfig:
    def __init__(self, input, phase, answer=None, steps_taken=0, queries_asked=0):
        self.input = input
        self.phase = phase  # "ask" | "emit"
        self.answer = answer
        self.steps_taken = steps_taken
        self.queries_asked = queries_asked


class FlattenedMachine:
    """Single-query machine equivalent to a predetermined question series.

    The one prompt is the concatenation of the original prompts; the
    answer is decoded one symbol per original question, padded with the
    first alphabet symbol when short.
    """

    def __init__(self, original, prompts_by_input, limits):
        self.original = original
        self.alphabet = original.alphabet
        self.series_length = max((len(p) for p in prompts_by_input.values()), default=0)
        conglomerate = max((len("".join(p)) for p in prompts_by_input.values()), default=0)
        self.max_answer_len = max(original.max_answer_len, self.series_length, conglomerate)
        self.name = f"{original.name}-flattened"
        self._prompts = prompts_by_input
        self._limits = limits
        self._hash = hashlib.sha256(
            f"flattened:{original.spec_hash()}".encode()).hexdigest()

    def spec_hash(self):
        return self._hash

    def input_domain(self):
        return self.original.input_domain()

    def validate_input(self, input):
        self.original.validate_input(input)

    def initial_config(self, input):
        self.validate_input(input)
        return FlattenedConfig(input=input, phase="ask")

    def decode(self, answer, input):
        k = len(self._prompts[json.dumps(input, sort_keys=True)])
        padded = (answer + self.alphabet.symbols[0] * k)[:k]
        return tuple(padded)

    def step(self, config):
        key = json.dumps(config.input, sort_keys=True)
        prompts = self._prompts[key]
        if config.phase == "ask":
            prompt = "".join(prompts)[: self.max_answer_len]

            def resume(answer, _config=config):
                if answer is STOP:
                    return Abort()
                return Continue(FlattenedConfig(
                    input=_config.input, phase="emit", answer=answer,
                    steps_taken=_config.steps_taken + 1, queries_asked=1))

            return Query(prompt=prompt, resume=resume)
        # emit: simulate the original series with the decoded answers
        parts = self.decode(config.answer, config.input)
        trace = run(self.original, config.input, ScriptedOracle(list(parts) or [""]),
                    limits=self._limits)
        if trace.outcome == HALT:
            return Halt(trace.output)
        return Abort()


def flatten_bounded_queries(machine, limits=Limits(), bound=8):
    """Collapse a predetermined question series into one conglomerate query."""
    inputs = machine.input_domain()
    prompts_by_input = {}
    for input in inputs:
        key = json.dumps(input, sort_keys=True)
        tree = build_tree(machine, input, limits)
        if _tree_has_truncation(tree):
            return FlattenResult(ok=False, witness={
                "input": input, "reason": "tree truncated; series not verifiable"})
        # every halt path must see the same count and per-index prompt
        counts = set()
        per_index = {}
        for path, node in iter_query_nodes(tree):
            per_index.setdefault(node.query_index, set()).add(node.prompt)
        for path, leaf in iter_leaf_paths(tree):
            if leaf.kind == "abort":
                continue
            counts.add(_queries_on_path(tree, path))
        if len(counts) > 1:
            return FlattenResult(ok=False, witness={
                "input": input, "reason": "query count depends on answers",
                "counts": sorted(counts)})
        for index, prompts in per_index.items():
            if len(prompts) > 1:
                return FlattenResult(ok=False, witness={
                    "input": input, "query_index": index,
                    "reason": "later question depends on earlier answers",
                    "prompts": sorted(prompts)})
        k = counts.pop() if counts else 0
        if k > bound:
            return FlattenResult(ok=False, witness={
                "input": input, "reason": f"series length {k} exceeds bound {bound}"})
        prompts_by_input[key] = [sorted(per_index[j])[0] for j in range(k)]

    if all(len(p) == 0 for p in prompts_by_input.values()):
        return FlattenResult(ok=True, machine=machine, mapping={}, unchanged=True,
                             certificate=EquivalenceResult(True, 0))

    lengths = {len(p) for p in prompts_by_input.values()}
    if len(lengths) > 1:
        return FlattenResult(ok=False, witness={
            "reason": "series length varies across inputs", "lengths": sorted(lengths)})

    flattened = FlattenedMachine(machine, prompts_by_input, limits)
    mapping = _single_symbol_mapping(machine.alphabet, lengths.pop())
    certificate = functions_equal(machine, flattened, mapping, limits)
    if not certificate.equal:
        return FlattenResult(ok=False, witness=certificate.witness,
                             certificate=certificate)
    return FlattenResult(ok=True, machine=flattened, mapping=mapping,
                         certificate=certificate)


def _single_symbol_mapping(alphabet, k):
    from itertools import product

    return {"".join(t): tuple(t) for t in product(alphabet.symbols, repeat=k)}


def _queries_on_path(tree, path):
    count = 0
    node = tree
    for answer in path:
        if isinstance(node, TreeQuery):
            count += 1
            node = dict(node.branches)[answer]
        else:
            break
    if isinstance(node, TreeQuery):
        count += 1
    return count


def functions_equal(machine_a, machine_b, answer_mapping, limits=Limits()):
    """Exhaustive equivalence of A against B composed with the answer mapping.

    ``answer_mapping`` maps each single B answer to the tuple of A answers
    it encodes.  Equality means identical (outcome, output) for every
    input and every mapped answer.
    """
    inputs_a = machine_a.input_domain()
    inputs_b = machine_b.input_domain()
    if inputs_a != inputs_b:
        return EquivalenceResult(False, 0, {"reason": "input domains differ"})
    cases = 0
    for input in inputs_a:
        for b_answer, a_tuple in answer_mapping.items():
            cases += 1
            trace_a = run(machine_a, input, ScriptedOracle(list(a_tuple) or [""]),
                          limits=limits)
            trace_b = run(machine_b, input, ScriptedOracle([b_answer]), limits=limits)
            if (trace_a.outcome, trace_a.output) != (trace_b.outcome, trace_b.output):
                return EquivalenceResult(False, cases, {
                    "input": input, "answer": b_answer, "tuple": list(a_tuple),
                    "a": [trace_a.outcome, trace_a.output],
                    "b": [trace_b.outcome, trace_b.output]})
    return EquivalenceResult(True, cases)


def functions_equal_identity(machine, limits=Limits()):
    """Machine against itself with the identity mapping on single answers."""
    mapping = {w: (w,) for w in enumeration_answers(machine.alphabet,
                                                    machine.max_answer_len)
               if w is not STOP}
    return functions_equal(machine, machine, mapping, limits)


# --- decisive points ---------------------------------------------------------

class _SubstituteOracle(OracleStrategy):
    """Replays a trace prefix, substitutes one answer, then delegates."""

    def __init__(self, trace, index, alternative, continuation):
        self.trace = trace
        self.index = index
        self.alternative = alternative
        self.continuation = continuation
        self.descriptor = f"substitute[{index}]"

    def answer(self, prompt, context):
        i = context.query_index
        if i < self.index:
            return self.trace.queries[i].answer
        if i == self.index:
            return self.alternative
        return self.continuation.answer(prompt, context)


def decisive_points(trace, machine, oracle=None, limits=Limits()):
    """Query indices where some alternative answer changes the outcome.

    Policy: replay the trace prefix, substitute the alternative at the
    probed index, then continue with the trace's oracle strategy.  STOP
    alternatives are excluded: aborting is always possible and does not
    count towards the outcome set.
    """
    if trace.outcome != HALT:
        raise DomainError("decisive_points requires a trace with a Halt outcome")
    if oracle is None:
        raise DomainError(
            "decisive_points needs the originating oracle strategy for continuation")
    words = [w for w in enumeration_answers(machine.alphabet, machine.max_answer_len)
             if w is not STOP]
    decisive = []
    for q in trace.queries:
        baseline = (trace.outcome, trace.output)
        for alternative in words:
            if alternative == q.answer:
                continue
            sub = _SubstituteOracle(trace, q.query_index, alternative, oracle)
            alt = run(machine, trace.input, sub, limits=limits)
            if (alt.outcome, alt.output) != baseline:
                decisive.append(q.query_index)
                break
    return sorted(decisive)


# --- per-trace metrics -------------------------------------------------------

@dataclass(frozen=True)
class TraceMetrics:
    segments: tuple
    max_segment: int
    unmasking_ratio: float
    queries: int

    def to_json(self):
        return {"segments": list(self.segments), "max_segment": self.max_segment,
                "unmasking_ratio": self.unmasking_ratio, "queries": self.queries}


def trace_metrics(trace):
    """Black-box segment strip of a single run.

    unmasking_ratio = queries / (queries + number of nonzero segments); an
    operational measure of how much of the computation the queries expose.
    """
    segments = tuple(trace.segments)
    q = len(trace.queries)
    nonzero = sum(1 for s in segments if s > 0)
    ratio = q / (q + nonzero) if (q + nonzero) else 0.0
    return TraceMetrics(segments=segments,
                        max_segment=max(segments) if segments else 0,
                        unmasking_ratio=ratio, queries=q)
