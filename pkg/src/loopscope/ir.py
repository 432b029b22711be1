"""Machine definitions and single-step semantics.

Two machine flavours share one stepping interface:

* process machines: a node graph (compute / branch / query / halt) over a
  typed variable store, authored in the JSON spec format;
* tape machines: a two-tape automaton with designated oracle states whose
  oracle-tape content is replaced wholesale by each answer.

A step yields a :class:`StepEffect`: Continue, Query, Halt, or Abort.
Delivering the reserved stop token to a query aborts the run with no
output; the stop token is never part of the answer alphabet.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

from .errors import DomainError, SpecError
from .expr import (
    Evaluator,
    IntDomain,
    EnumDomain,
    TBool,
    TWord,
    TypeChecker,
    WordDomain,
    domain_from_json,
    parse_expr,
)

STOP_SYMBOL = "!"


class _StopToken:
    """Singleton emergency-stop answer; deliberately not a Word."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "STOP"


STOP = _StopToken()


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        if not self.symbols:
            raise SpecError("alphabet must be nonempty")
        if len(set(self.symbols)) != len(self.symbols):
            raise SpecError("alphabet has duplicate symbols")
        for s in self.symbols:
            if not isinstance(s, str) or len(s) != 1:
                raise SpecError(f"alphabet symbols must be single characters, got {s!r}")
            if s == STOP_SYMBOL:
                raise SpecError("'!' is reserved for emergency stop and cannot be an alphabet symbol")

    def contains_word(self, w, max_len):
        return isinstance(w, str) and len(w) <= max_len and all(c in self.symbols for c in w)


# --- step effects ------------------------------------------------------------

@dataclass(frozen=True)
class Continue:
    config: object


@dataclass(frozen=True)
class Query:
    prompt: str
    resume: object = field(compare=False)  # answer -> Continue | Abort
    tag: str | None = None
    default: str | None = None
    hazard: bool = False


@dataclass(frozen=True)
class Halt:
    output: str


@dataclass(frozen=True)
class Abort:
    pass


# --- process machine ---------------------------------------------------------

@dataclass(frozen=True)
class ComputeNode:
    assignments: tuple  # of (var, expr-ast, expr-src)
    next: str


@dataclass(frozen=True)
class BranchNode:
    condition: object
    condition_src: str
    then: str
    orelse: str


@dataclass(frozen=True)
class QueryNodeSpec:
    prompt: object
    prompt_src: str
    bind: str
    next: str
    tag: str | None = None
    default: str | None = None
    hazard: bool = False


@dataclass(frozen=True)
class HaltNode:
    output: object
    output_src: str


@dataclass(frozen=True)
class ProcessConfig:
    node: str
    store: tuple  # sorted (name, value) pairs
    steps_taken: int = 0
    queries_asked: int = 0

    def store_dict(self):
        return dict(self.store)


def _freeze_store(d):
    return tuple(sorted(d.items()))


class ProcessMachine:
    """Validated process spec plus its stepping semantics."""

    def __init__(self, name, alphabet, max_answer_len, inputs, vars, entry, nodes, raw):
        self.name = name
        self.alphabet = alphabet
        self.max_answer_len = max_answer_len
        self.inputs = inputs  # list of (name, domain)
        self.vars = vars
        self.entry = entry
        self.nodes = nodes
        self._raw = raw
        self._env = dict(inputs) | dict(vars)
        self._eval = Evaluator(self._env, alphabet, max_answer_len)
        self._hash = hashlib.sha256(
            json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()

    def spec_hash(self):
        return self._hash

    def to_json(self):
        return self._raw

    def input_domain(self):
        """All input assignments, in declaration-then-value order."""
        results = [{}]
        for name, dom in self.inputs:
            if isinstance(dom, WordDomain):
                values = list(enumerate_words(self.alphabet, self.max_answer_len))
            else:
                values = list(dom.values())
            results = [dict(r, **{name: v}) for r in results for v in values]
        return results

    def validate_input(self, input):
        declared = {name for name, _ in self.inputs}
        if set(input) != declared:
            raise DomainError(f"input must assign exactly {sorted(declared)}, got {sorted(input)}")
        for name, dom in self.inputs:
            v = input[name]
            if isinstance(dom, WordDomain):
                if not self.alphabet.contains_word(v, self.max_answer_len):
                    raise DomainError(f"input {name}={v!r} is not a word in the answer space")
            elif not dom.contains(v):
                raise DomainError(f"input {name}={v!r} outside its declared domain")

    def initial_config(self, input):
        self.validate_input(input)
        store = dict(input)
        for name, dom in self.vars:
            if isinstance(dom, IntDomain):
                store[name] = 0
            elif isinstance(dom, EnumDomain):
                store[name] = dom.labels[0]
            else:
                store[name] = ""
        return ProcessConfig(node=self.entry, store=_freeze_store(store))

    def step(self, config):
        node = self.nodes[config.node]
        store = config.store_dict()
        if isinstance(node, ComputeNode):
            for var, ast, _src in node.assignments:
                v = self._eval.eval(ast, store)
                store[var] = self._coerce(var, v)
            return Continue(replace(config, node=node.next,
                                    store=_freeze_store(store),
                                    steps_taken=config.steps_taken + 1))
        if isinstance(node, BranchNode):
            branch = node.then if self._eval.eval(node.condition, store) else node.orelse
            return Continue(replace(config, node=branch, steps_taken=config.steps_taken + 1))
        if isinstance(node, QueryNodeSpec):
            prompt = self._eval.eval(node.prompt, store)

            def resume(answer, _config=config, _node=node, _store=store):
                if answer is STOP:
                    return Abort()
                if not self.alphabet.contains_word(answer, self.max_answer_len):
                    raise DomainError(f"answer {answer!r} outside the answer space")
                new_store = dict(_store)
                new_store[_node.bind] = answer
                return Continue(replace(_config, node=_node.next,
                                        store=_freeze_store(new_store),
                                        steps_taken=_config.steps_taken + 1,
                                        queries_asked=_config.queries_asked + 1))

            return Query(prompt=prompt, resume=resume, tag=node.tag,
                         default=node.default, hazard=node.hazard)
        if isinstance(node, HaltNode):
            # The output is written to the oracle tape before halting; the
            # machine's output is always the oracle tape content.
            return Halt(self._eval.eval(node.output, store))
        raise SpecError(f"unknown node kind at {config.node!r}")

    def _coerce(self, var, v):
        dom = self._env[var]
        if isinstance(dom, IntDomain):
            return v % dom.size
        if isinstance(dom, WordDomain):
            return v[: self.max_answer_len]
        if not dom.contains(v):
            raise DomainError(f"value {v!r} outside enum domain of {var!r}")
        return v


def enumerate_words(alphabet, max_len):
    """All words of length 0..max_len in length-then-lexicographic order."""
    from itertools import product

    yield ""
    for length in range(1, max_len + 1):
        for combo in product(alphabet.symbols, repeat=length):
            yield "".join(combo)


# --- tape machine ------------------------------------------------------------

BLANK = "_"
MOVES = {"L": -1, "R": 1, "S": 0}


@dataclass(frozen=True)
class TapeConfig:
    state: str
    work: tuple  # sparse tape as sorted (pos, sym) pairs
    work_head: int
    oracle: str  # oracle tape content (word; may contain '!')
    oracle_head: int
    steps_taken: int = 0
    queries_asked: int = 0
    oracle_served: bool = False  # set after the call for the current oracle-state visit


def _tape_read(cells, pos, blank=BLANK):
    return dict(cells).get(pos, blank)


def _tape_write(cells, pos, sym, blank=BLANK):
    d = dict(cells)
    if sym == blank:
        d.pop(pos, None)
    else:
        d[pos] = sym
    return tuple(sorted(d.items()))


class TapeMachine:
    """Two-tape oracle machine: work tape plus oracle tape.

    Entering an oracle state surfaces a Query carrying the oracle-tape
    word (up to the first blank); the answer replaces the tape content in
    one step and the oracle head resets to the leftmost cell.  Halt states
    output the oracle-tape word.  Reading the reserved '!' symbol on the
    oracle tape aborts immediately.
    """

    def __init__(self, name, alphabet, max_answer_len, states, work_alphabet,
                 initial_state, transitions, oracle_states, halt_states,
                 input_words, raw):
        self.name = name
        self.alphabet = alphabet
        self.max_answer_len = max_answer_len
        self.states = states
        self.work_alphabet = work_alphabet
        self.initial_state = initial_state
        self.transitions = transitions  # (state, work, oracle) -> rule; '*' wildcards allowed
        self.oracle_states = oracle_states
        self.halt_states = halt_states
        self.input_words = input_words
        self._raw = raw
        self._hash = hashlib.sha256(
            json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()

    def spec_hash(self):
        return self._hash

    def to_json(self):
        return self._raw

    def input_domain(self):
        return [{"input": w} for w in self.input_words]

    def validate_input(self, input):
        if set(input) != {"input"}:
            raise DomainError("tape machine input must be {'input': word}")
        if input["input"] not in self.input_words:
            raise DomainError(f"input {input['input']!r} outside the declared input words")

    def initial_config(self, input):
        self.validate_input(input)
        word = input["input"]
        cells = tuple((i, c) for i, c in enumerate(word))
        return TapeConfig(state=self.initial_state, work=cells, work_head=0,
                          oracle="", oracle_head=0)

    def oracle_word(self, config):
        w = config.oracle
        cut = w.find(BLANK)
        return w if cut < 0 else w[:cut]

    def step(self, config):
        if config.state in self.halt_states:
            return Halt(self.oracle_word(config))
        if config.state in self.oracle_states and not config.oracle_served:
            prompt = self.oracle_word(config)

            def resume(answer, _config=config):
                if answer is STOP:
                    return Abort()
                if not self.alphabet.contains_word(answer, self.max_answer_len):
                    raise DomainError(f"answer {answer!r} outside the answer space")
                return Continue(replace(_config, oracle=answer, oracle_head=0,
                                        steps_taken=_config.steps_taken + 1,
                                        queries_asked=_config.queries_asked + 1,
                                        oracle_served=True))

            return Query(prompt=prompt, resume=resume)
        work_sym = _tape_read(config.work, config.work_head)
        oracle_sym = config.oracle[config.oracle_head] if config.oracle_head < len(config.oracle) else BLANK
        if oracle_sym == STOP_SYMBOL:
            return Abort()
        rule = self._lookup(config.state, work_sym, oracle_sym)
        if rule is None:
            raise SpecError(
                f"no transition for (state={config.state!r}, work={work_sym!r}, oracle={oracle_sym!r})")
        to, write_work, write_oracle, move_work, move_oracle = rule
        work = _tape_write(config.work, config.work_head,
                           work_sym if write_work == "*" else write_work)
        oracle = config.oracle
        osym = oracle_sym if write_oracle == "*" else write_oracle
        if config.oracle_head < len(oracle):
            oracle = oracle[: config.oracle_head] + osym + oracle[config.oracle_head + 1:]
        elif osym != BLANK:
            oracle = oracle + BLANK * (config.oracle_head - len(oracle)) + osym
        return Continue(TapeConfig(
            state=to,
            work=work,
            work_head=config.work_head + MOVES[move_work],
            oracle=oracle,
            oracle_head=max(0, config.oracle_head + MOVES[move_oracle]),
            steps_taken=config.steps_taken + 1,
            queries_asked=config.queries_asked,
            oracle_served=False,  # every (re-)entry of an oracle state queries again
        ))

    def _lookup(self, state, work, oracle):
        for key in ((state, work, oracle), (state, work, "*"),
                    (state, "*", oracle), (state, "*", "*")):
            if key in self.transitions:
                return self.transitions[key]
        return None


# --- parsing -----------------------------------------------------------------

_PROCESS_KEYS = {"name", "alphabet", "max_answer_len", "inputs", "vars", "entry", "nodes"}
_TAPE_KEYS = {"mode", "name", "alphabet", "max_answer_len", "states", "work_alphabet",
              "initial_state", "transitions", "oracle_states", "halt_states", "input_words"}


def parse_spec(text):
    """Parse a JSON machine spec into a ProcessMachine or TapeMachine."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"invalid JSON: {e.msg}", position=(e.lineno, e.colno)) from e
    return spec_from_json(doc)


def spec_from_json(doc):
    if not isinstance(doc, dict):
        raise SpecError("spec document must be a JSON object")
    if doc.get("mode") == "tape":
        return _tape_from_json(doc)
    return _process_from_json(doc)


def _common_header(doc):
    name = doc.get("name", "unnamed")
    symbols = doc.get("alphabet", ["0", "1"])
    if STOP_SYMBOL in symbols:
        raise SpecError("'!' declared in alphabet")
    alphabet = Alphabet(tuple(symbols))
    max_answer_len = doc.get("max_answer_len", 1)
    if not isinstance(max_answer_len, int) or max_answer_len < 0:
        raise SpecError(f"max_answer_len must be a nonnegative int, got {max_answer_len!r}")
    return name, alphabet, max_answer_len


def _process_from_json(doc):
    extra = set(doc) - _PROCESS_KEYS
    if extra:
        raise SpecError(f"unknown keys in spec: {sorted(extra)}")
    name, alphabet, max_answer_len = _common_header(doc)
    inputs = _decls(doc.get("inputs", []), "inputs")
    vars_ = _decls(doc.get("vars", []), "vars")
    names = [n for n, _ in inputs] + [n for n, _ in vars_]
    if len(set(names)) != len(names):
        raise SpecError("duplicate variable/input names")
    entry = doc.get("entry")
    nodes_json = doc.get("nodes")
    if not isinstance(nodes_json, dict) or not nodes_json:
        raise SpecError("spec needs a nonempty 'nodes' map")
    if entry not in nodes_json:
        raise SpecError(f"entry node {entry!r} not defined")

    env = dict(inputs) | dict(vars_)
    checker = TypeChecker(env, alphabet, max_answer_len)
    nodes = {}
    for node_id, nj in nodes_json.items():
        nodes[node_id] = _node_from_json(node_id, nj, nodes_json, env, checker)
    return ProcessMachine(name, alphabet, max_answer_len, inputs, vars_, entry, nodes, doc)


def _decls(items, label):
    out = []
    for item in items:
        if not isinstance(item, dict) or set(item) != {"name", "domain"}:
            raise SpecError(f"each entry of {label!r} must be {{name, domain}}, got {item!r}")
        out.append((item["name"], domain_from_json(item["domain"])))
    return out


def _check_ref(node_id, ref, nodes_json):
    if ref not in nodes_json:
        raise SpecError(f"node {node_id!r} references unknown node {ref!r}")
    return ref


def _node_from_json(node_id, nj, nodes_json, env, checker):
    if not isinstance(nj, dict):
        raise SpecError(f"node {node_id!r} must be an object")
    kind = nj.get("kind")
    if kind == "compute":
        _reject(nj, {"kind", "assignments", "next"}, node_id)
        assigns = []
        for pair in nj.get("assignments", []):
            if not (isinstance(pair, list) and len(pair) == 2):
                raise SpecError(f"assignment in node {node_id!r} must be [var, expr]")
            var, src = pair
            if var not in env:
                raise SpecError(f"unbound variable {var!r} in node {node_id!r}")
            ast = parse_expr(src)
            t = checker.check(ast)
            _check_assignable(env[var], t, var, node_id)
            assigns.append((var, ast, src))
        return ComputeNode(tuple(assigns), _check_ref(node_id, nj.get("next"), nodes_json))
    if kind == "branch":
        _reject(nj, {"kind", "condition", "then", "else"}, node_id)
        src = nj.get("condition")
        ast = parse_expr(src)
        if not isinstance(checker.check(ast), TBool):
            raise SpecError(f"branch condition in node {node_id!r} is not boolean")
        return BranchNode(ast, src,
                          _check_ref(node_id, nj.get("then"), nodes_json),
                          _check_ref(node_id, nj.get("else"), nodes_json))
    if kind == "query":
        _reject(nj, {"kind", "prompt", "bind", "next", "tag", "default", "hazard"}, node_id)
        src = nj.get("prompt")
        ast = parse_expr(src)
        if not isinstance(checker.check(ast), TWord):
            raise SpecError(f"query prompt in node {node_id!r} must be a word expression")
        bind = nj.get("bind")
        if bind not in env:
            raise SpecError(f"unbound variable {bind!r} bound by query node {node_id!r}")
        if not isinstance(env[bind], WordDomain):
            raise SpecError(f"query bind variable {bind!r} must have a word domain")
        default = nj.get("default")
        if default is not None and not isinstance(default, str):
            raise SpecError(f"query default in node {node_id!r} must be a word literal")
        return QueryNodeSpec(ast, src, bind,
                             _check_ref(node_id, nj.get("next"), nodes_json),
                             tag=nj.get("tag"), default=default,
                             hazard=bool(nj.get("hazard", False)))
    if kind == "halt":
        _reject(nj, {"kind", "output"}, node_id)
        src = nj.get("output")
        ast = parse_expr(src)
        if not isinstance(checker.check(ast), TWord):
            raise SpecError(f"halt output in node {node_id!r} must be a word expression")
        return HaltNode(ast, src)
    raise SpecError(f"unknown node kind {kind!r} in node {node_id!r}")


def _check_assignable(dom, t, var, node_id):
    from .expr import TInt
    if isinstance(dom, IntDomain) and not isinstance(t, TInt):
        raise SpecError(f"type mismatch assigning to int variable {var!r} in node {node_id!r}")
    if isinstance(dom, WordDomain) and not isinstance(t, TWord):
        raise SpecError(f"type mismatch assigning to word variable {var!r} in node {node_id!r}")


def _reject(nj, allowed, node_id):
    extra = set(nj) - allowed
    if extra:
        raise SpecError(f"unknown keys {sorted(extra)} in node {node_id!r}")


def _tape_from_json(doc):
    extra = set(doc) - _TAPE_KEYS
    if extra:
        raise SpecError(f"unknown keys in tape spec: {sorted(extra)}")
    name, alphabet, max_answer_len = _common_header(doc)
    states = tuple(doc.get("states", []))
    if not states:
        raise SpecError("tape spec needs states")
    initial = doc.get("initial_state")
    if initial not in states:
        raise SpecError(f"initial state {initial!r} not in states")
    oracle_states = frozenset(doc.get("oracle_states", []))
    halt_states = frozenset(doc.get("halt_states", []))
    if not (oracle_states <= set(states) and halt_states <= set(states)):
        raise SpecError("oracle_states and halt_states must be subsets of states")
    if oracle_states & halt_states:
        raise SpecError("oracle_states and halt_states must be disjoint")
    work_alphabet = tuple(doc.get("work_alphabet", list(alphabet.symbols)))
    transitions = {}
    for tj in doc.get("transitions", []):
        required = {"state", "work", "oracle", "to", "write_work", "write_oracle",
                    "move_work", "move_oracle"}
        if set(tj) != required:
            raise SpecError(f"transition must have keys {sorted(required)}, got {sorted(tj)}")
        if tj["state"] not in states or tj["to"] not in states:
            raise SpecError(f"transition references unknown state: {tj}")
        if tj["move_work"] not in MOVES or tj["move_oracle"] not in MOVES:
            raise SpecError(f"transition moves must be L/R/S: {tj}")
        key = (tj["state"], tj["work"], tj["oracle"])
        if key in transitions:
            raise SpecError(f"duplicate transition for {key}")
        transitions[key] = (tj["to"], tj["write_work"], tj["write_oracle"],
                            tj["move_work"], tj["move_oracle"])
    input_words = doc.get("input_words")
    if input_words is None:
        input_words = list(enumerate_words(alphabet, max_answer_len))
    for w in input_words:
        if not alphabet.contains_word(w, max(max_answer_len, max(map(len, input_words or [""])))):
            raise SpecError(f"input word {w!r} uses symbols outside the alphabet")
    return TapeMachine(name, alphabet, max_answer_len, states, work_alphabet, initial,
                       transitions, oracle_states, halt_states, tuple(input_words), doc)


def adapt_tape_machine(machine):
    """Tape machines already speak the step interface; returned unchanged."""
    if not isinstance(machine, TapeMachine):
        raise SpecError("adapt_tape_machine expects a TapeMachine")
    return machine
