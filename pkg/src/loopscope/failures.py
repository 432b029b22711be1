"""Failure taxonomy, fault injection, and seeded timed simulation.

The catalog has five fixed categories of oversight failure, each with a
list of named modes.  A fault instantiates one mode with parameters and
wraps a machine, an oracle, or a timed workflow without touching its
definition.  Timed scenarios run a discrete-event loop: environment
events set the clock, notification stages deliver prompts (possibly
late), the stochastic human answers, and a harm rule judges the final
timing or answer.  Everything is a pure function of (scenario, seed), so
Monte Carlo summaries and ablation attributions are exactly repeatable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import InjectionError, ScenarioError
from .ir import Alphabet, Query, STOP
from .oracles import (
    ConstantOracle,
    HumanModelParams,
    OracleStrategy,
    QueryContext,
    StochasticHuman,
)
from .rng import derive_seed

HARM = "harm"
AVERTED = "averted"
ABORTED = "aborted"
COMPLETED = "completed"


# --- taxonomy ----------------------------------------------------------------

@dataclass(frozen=True)
class FailureMode:
    mode_id: str
    name: str
    effect: str  # keys into _EFFECT_SCHEMAS
    category_id: str

    @property
    def ablatable(self):
        # "other ..." catch-alls carry free text only and are excluded
        # from ablation; annotations have no behavioural effect either.
        return self.effect not in ("free_text", "annotation")

    def to_json(self):
        return {"mode_id": self.mode_id, "name": self.name, "effect": self.effect,
                "category_id": self.category_id,
                "params": sorted(_EFFECT_SCHEMAS[self.effect])}


@dataclass(frozen=True)
class FailureCategory:
    category_id: str
    name: str
    modes: tuple

    def to_json(self):
        return {"category_id": self.category_id, "name": self.name,
                "modes": [m.to_json() for m in self.modes]}


@dataclass(frozen=True)
class FailureCatalog:
    categories: tuple

    def mode(self, mode_id):
        for cat in self.categories:
            for m in cat.modes:
                if m.mode_id == mode_id:
                    return m
        raise InjectionError(f"unknown failure mode {mode_id!r}")

    def to_json(self):
        return {"categories": [c.to_json() for c in self.categories]}


# effect -> (required param names, optional param names)
_EFFECT_SCHEMAS = {
    "stage_delay": ({"stage", "delay"}, set()),
    "suppress_stage": ({"stage"}, set()),
    "event_rewrite": ({"event", "labels", "dwell"}, {"shift"}),
    "oracle_delay": ({"delay"}, set()),
    "prompt_truncation": ({"keep"}, set()),
    "human_override": (set(), {"eps0", "gamma", "eps_max", "automation_bias",
                               "courage", "p_distract", "p_recover", "warmup"}),
    "annotation": (set(), {"description"}),
    "free_text": ({"description"}, set()),
}

_EFFECT_TARGETS = {
    "stage_delay": {"workflow"},
    "suppress_stage": {"workflow"},
    "event_rewrite": {"workflow", "machine"},
    "oracle_delay": {"oracle"},
    "prompt_truncation": {"machine"},
    "human_override": {"oracle"},
    "annotation": {"workflow", "machine", "oracle"},
    "free_text": {"workflow", "machine", "oracle"},
}

_TAXONOMY = (
    ("FC1", "Failure of the machine components", (
        ("Unexpected inputs or outputs", "event_rewrite"),
        ("Problematic machine evolution or self-adaptation", "annotation"),
        ("Hallucinations", "annotation"),
        ("Reasoning errors", "annotation"),
        ("Overfitting of training data", "annotation"),
        ("Biased or other erroneous outputs", "annotation"),
        ("Unfalsifiable outputs", "annotation"),
        ("Lacking 'common sense'", "annotation"),
        ("Morally unacceptable outputs", "annotation"),
        ("Other unexpected behaviour", "free_text"),
    )),
    ("FC2", "Failure of the process and workflow", (
        ("Insufficient power of the human", "suppress_stage"),
        ("Insufficient self-control/independence", "annotation"),
        ("Insufficient reaction time", "oracle_delay"),
        ("Unrealistic expectations", "annotation"),
        ("Delayed notification", "stage_delay"),
        ("Lack of disaster planning", "annotation"),
        ("Insufficient management support", "annotation"),
        ("Insufficient psychological support", "annotation"),
        ("Lack of rest", "annotation"),
        ("Conflict of interest", "annotation"),
        ("Other process and workflow failures", "free_text"),
    )),
    ("FC3", "Failure at the human-machine interface", (
        ("Incomprehensible or incomplete outputs", "prompt_truncation"),
        ("Complex or poorly designed user interface", "annotation"),
        ("Constantly changing user interface", "annotation"),
        ("Insufficient training", "stage_delay"),
        ("Poor documentation", "annotation"),
        ("Transition failures between different humans", "annotation"),
        ("Other HCI adaptability failures", "free_text"),
        ("Other epistemic failures", "free_text"),
        ("Other interaction failures", "free_text"),
    )),
    ("FC4", "Failure of the human component", (
        ("Cognitive bias", "human_override"),
        ("Automation bias", "human_override"),
        ("Confirmation bias", "annotation"),
        ("Fatigue", "human_override"),
        ("Incongruous intentions", "annotation"),
        ("Stress or overload", "annotation"),
        ("Lacking courage", "stage_delay"),
        ("Lacking motivation", "annotation"),
        ("Lacking self-awareness", "annotation"),
        ("Lacking humility", "annotation"),
        ("Onset of groupthink", "annotation"),
        ("Other human-centric failures", "free_text"),
    )),
    ("FC5", "Exogenous circumstances", (
        ("Unreasonable laws", "suppress_stage"),
        ("Unreasonable societal expectations", "annotation"),
        ("Conflicting requirements", "annotation"),
        ("Misaligned objectives", "annotation"),
        ("Political pressure", "annotation"),
        ("Unexpected exogenous shocks", "annotation"),
        ("Poor safety culture", "annotation"),
        ("Inappropriate workplace requirements", "annotation"),
        ("Insufficient resources", "annotation"),
        ("Other external pressures", "free_text"),
    )),
)


def _slug(name):
    keep = [c.lower() if c.isalnum() else "-" for c in name]
    slug = "".join(keep)
    while "--" in slug:
        slug = slug.replace("--", "-")
    return slug.strip("-")


def load_taxonomy():
    categories = []
    for cat_id, cat_name, modes in _TAXONOMY:
        built = tuple(
            FailureMode(mode_id=f"{cat_id}.{_slug(name)}", name=name,
                        effect=effect, category_id=cat_id)
            for name, effect in modes)
        categories.append(FailureCategory(cat_id, cat_name, built))
    catalog = FailureCatalog(tuple(categories))
    ids = [m.mode_id for c in catalog.categories for m in c.modes]
    assert len(set(ids)) == len(ids)
    return catalog


_CATALOG = load_taxonomy()


# --- fault injection ---------------------------------------------------------

@dataclass(frozen=True)
class FaultInjection:
    mode_id: str
    target: str  # machine | oracle | workflow
    params: tuple  # sorted (key, value) pairs

    def __init__(self, mode_id, target, params):
        object.__setattr__(self, "mode_id", mode_id)
        object.__setattr__(self, "target", target)
        if isinstance(params, dict):
            params = tuple(sorted(params.items(),
                                  key=lambda kv: kv[0]))
        object.__setattr__(self, "params", tuple(params))
        self.validate()

    def param_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params}

    @property
    def mode(self):
        return _CATALOG.mode(self.mode_id)

    def validate(self):
        mode = self.mode
        if self.target not in ("machine", "oracle", "workflow"):
            raise InjectionError(f"unknown target {self.target!r}")
        if self.target not in _EFFECT_TARGETS[mode.effect]:
            raise InjectionError(
                f"mode {self.mode_id!r} cannot target {self.target!r}")
        required, optional = _EFFECT_SCHEMAS[mode.effect]
        given = {k for k, _ in self.params}
        missing = required - given
        extra = given - required - optional
        if missing:
            raise InjectionError(f"fault {self.mode_id!r} missing params {sorted(missing)}")
        if extra:
            raise InjectionError(f"fault {self.mode_id!r} has unknown params {sorted(extra)}")

    def to_json(self):
        return {"mode_id": self.mode_id, "target": self.target,
                "params": self.param_dict()}

    @classmethod
    def from_json(cls, obj):
        params = {k: (tuple(v) if isinstance(v, list) else v)
                  for k, v in obj.get("params", {}).items()}
        return cls(obj["mode_id"], obj["target"], params)


class TruncatedPromptMachine:
    """Machine wrapper that shortens every prompt to its first j symbols."""

    def __init__(self, inner, keep):
        if keep < 0:
            raise InjectionError("prompt truncation keep must be nonnegative")
        self.inner = inner
        self.keep = keep
        self.alphabet = inner.alphabet
        self.max_answer_len = inner.max_answer_len
        self.name = f"{inner.name}+truncated[{keep}]"

    def spec_hash(self):
        import hashlib
        return hashlib.sha256(
            f"truncate:{self.keep}:{self.inner.spec_hash()}".encode()).hexdigest()

    def input_domain(self):
        return self.inner.input_domain()

    def validate_input(self, input):
        self.inner.validate_input(input)

    def initial_config(self, input):
        return self.inner.initial_config(input)

    def step(self, config):
        effect = self.inner.step(config)
        if isinstance(effect, Query):
            return replace(effect, prompt=effect.prompt[: self.keep])
        return effect


class DelayedOracle(OracleStrategy):
    """Oracle wrapper adding a fixed delay to every response."""

    def __init__(self, inner, delay):
        self.inner = inner
        self.delay = float(delay)
        self.deterministic = inner.deterministic
        self.descriptor = f"{inner.descriptor}+delay[{delay}]"

    def answer(self, prompt, context):
        return self.inner.answer(prompt, context)

    def response_delay(self, prompt, context):
        return self.inner.response_delay(prompt, context) + self.delay


def override_human_params(params, overrides):
    fat = params.fatigue
    att = params.attention
    return HumanModelParams(
        reaction=params.reaction,
        attention=replace(att,
                          p_distract=overrides.get("p_distract", att.p_distract),
                          p_recover=overrides.get("p_recover", att.p_recover),
                          warmup=overrides.get("warmup", att.warmup)),
        automation_bias=overrides.get("automation_bias", params.automation_bias),
        fatigue=replace(fat,
                        eps0=overrides.get("eps0", fat.eps0),
                        gamma=overrides.get("gamma", fat.gamma),
                        eps_max=overrides.get("eps_max", fat.eps_max)),
        courage=overrides.get("courage", params.courage),
        seed_stream=params.seed_stream,
    )


def inject(target, fault):
    """Wrap a machine, oracle, or timed scenario with one fault's behaviour."""
    effect = fault.mode.effect
    params = dict(fault.params)
    if isinstance(target, TimedScenario):
        if fault.target == "oracle":
            raise InjectionError("oracle faults wrap the oracle, not the scenario")
        return replace(target, faults=target.faults + (fault,))
    if isinstance(target, OracleStrategy):
        if effect == "oracle_delay":
            return DelayedOracle(target, params["delay"])
        if effect == "human_override":
            if not isinstance(target, StochasticHuman):
                raise InjectionError("human overrides need a stochastic human oracle")
            return StochasticHuman(override_human_params(target.params, params),
                                   target.seed, target.intent, target.alphabet,
                                   target.max_answer_len)
        if effect in ("annotation", "free_text"):
            return target
        raise InjectionError(f"mode {fault.mode_id!r} cannot wrap an oracle")
    if hasattr(target, "step"):
        if effect == "prompt_truncation":
            return TruncatedPromptMachine(target, params["keep"])
        if effect in ("annotation", "free_text"):
            return target
        raise InjectionError(f"mode {fault.mode_id!r} cannot wrap a machine")
    raise InjectionError(f"cannot inject into {type(target).__name__}")


# --- timed scenarios ---------------------------------------------------------

_STAGE_KINDS = {"auto", "notify", "respond", "fixed"}
_HARM_KINDS = {"deadline_miss", "threshold", "wrong_answer"}


@dataclass(frozen=True)
class HarmRule:
    kind: str
    deadline_event: str = ""  # deadline_miss: environment event that ends the window
    response_stage: str = ""  # deadline_miss: stage whose completion is judged
    limit: float = 0.0  # threshold: latest acceptable completion time
    intent: str = ""  # wrong_answer: the answer that avoids harm

    def to_json(self):
        out = {"kind": self.kind}
        if self.kind == "deadline_miss":
            out |= {"deadline_event": self.deadline_event,
                    "response_stage": self.response_stage}
        elif self.kind == "threshold":
            out["limit"] = self.limit
        else:
            out["intent"] = self.intent
        return out

    @classmethod
    def from_json(cls, obj):
        kind = obj.get("kind")
        if kind not in _HARM_KINDS:
            raise ScenarioError(f"unknown harm rule kind {kind!r}")
        return cls(kind=kind,
                   deadline_event=obj.get("deadline_event", ""),
                   response_stage=obj.get("response_stage", ""),
                   limit=float(obj.get("limit", 0.0)),
                   intent=obj.get("intent", ""))


@dataclass(frozen=True)
class TimedScenario:
    name: str
    timeline: tuple  # sorted (t, event label)
    stages: tuple  # stage dicts, validated, run in order
    human: HumanModelParams
    intent: str  # the answer an unimpaired human means to give
    faults: tuple  # FaultInjection
    harm: HarmRule
    alphabet: Alphabet = Alphabet(("0", "1"))
    max_answer_len: int = 1

    def __post_init__(self):
        times = [t for t, _ in self.timeline]
        if times != sorted(times):
            raise ScenarioError("timeline must be sorted by time")
        labels = [label for _, label in self.timeline]
        if len(set(labels)) != len(labels):
            raise ScenarioError("timeline event labels must be unique")
        ids = [s["id"] for s in self.stages]
        if len(set(ids)) != len(ids):
            raise ScenarioError("stage ids must be unique")
        for s in self.stages:
            if s.get("kind") not in _STAGE_KINDS:
                raise ScenarioError(f"unknown stage kind in {s.get('id')!r}")
        event_set = set(labels)
        if self.harm.kind == "deadline_miss":
            if self.harm.deadline_event not in event_set:
                raise ScenarioError(
                    f"harm rule references unknown event {self.harm.deadline_event!r}")
            if self.harm.response_stage not in set(ids):
                raise ScenarioError(
                    f"harm rule references unknown stage {self.harm.response_stage!r}")
        for f in self.faults:
            f.validate()
            p = dict(f.params)
            if "stage" in p and p["stage"] not in set(ids):
                raise ScenarioError(f"fault {f.mode_id!r} targets unknown stage {p['stage']!r}")
            if "event" in p and p["event"] not in event_set:
                raise ScenarioError(f"fault {f.mode_id!r} targets unknown event {p['event']!r}")

    def without_fault(self, fault):
        return replace(self, faults=tuple(f for f in self.faults if f is not fault))

    def to_json(self):
        return {"name": self.name,
                "timeline": [[t, label] for t, label in self.timeline],
                "stages": [dict(s) for s in self.stages],
                "human": self.human.to_json(),
                "intent": self.intent,
                "faults": [f.to_json() for f in self.faults],
                "harm": self.harm.to_json(),
                "alphabet": list(self.alphabet.symbols),
                "max_answer_len": self.max_answer_len}

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(
                name=obj.get("name", "unnamed"),
                timeline=tuple((float(t), label) for t, label in obj.get("timeline", [])),
                stages=tuple(dict(s) for s in obj.get("stages", [])),
                human=HumanModelParams.from_json(obj.get("human", {})),
                intent=obj.get("intent", ""),
                faults=tuple(FaultInjection.from_json(f) for f in obj.get("faults", [])),
                harm=HarmRule.from_json(obj.get("harm", {})),
                alphabet=Alphabet(tuple(obj.get("alphabet", ["0", "1"]))),
                max_answer_len=int(obj.get("max_answer_len", 1)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ScenarioError(f"malformed timed scenario: {e}") from e


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    outcome: str  # harm | averted | aborted | completed
    response_latency: tuple  # seconds, one per respond stage reached
    triggered_modes: tuple  # mode_ids whose effect was exercised
    answers: tuple  # answer words, "!" for stop
    final_time: float
    stage_times: tuple  # (stage_id, completion time)
    rewrites: tuple  # (event, label sequence) from misclassification faults

    def to_json(self):
        return {"seed": self.seed, "outcome": self.outcome,
                "response_latency": list(self.response_latency),
                "triggered_modes": list(self.triggered_modes),
                "answers": list(self.answers),
                "final_time": self.final_time,
                "stage_times": [[s, t] for s, t in self.stage_times],
                "rewrites": [[e, list(seq)] for e, seq in self.rewrites]}


def _faults_by_effect(scenario):
    grouped = {}
    for f in scenario.faults:
        grouped.setdefault(f.mode.effect, []).append(f)
    return grouped


def simulate_timed(scenario, seed):
    """One deterministic discrete-event trial of the scenario."""
    grouped = _faults_by_effect(scenario)
    triggered = []

    events = {label: t for t, label in scenario.timeline}
    rewrites = []
    for f in grouped.get("event_rewrite", []):
        p = dict(f.params)
        events[p["event"]] = events[p["event"]] + float(p.get("shift", 0.0))
        rewrites.append((p["event"], tuple(p["labels"])))
        triggered.append(f.mode_id)

    params = scenario.human
    for f in grouped.get("human_override", []):
        params = override_human_params(params, dict(f.params))
        triggered.append(f.mode_id)
    human = StochasticHuman(params, seed, ConstantOracle(scenario.intent),
                            scenario.alphabet, scenario.max_answer_len)
    extra_reaction = sum(float(dict(f.params)["delay"])
                         for f in grouped.get("oracle_delay", []))
    for f in grouped.get("oracle_delay", []):
        triggered.append(f.mode_id)

    def stage_delays(stage_id):
        total = 0.0
        for f in grouped.get("stage_delay", []):
            p = dict(f.params)
            if p["stage"] == stage_id:
                total += float(p["delay"])
                triggered.append(f.mode_id)
        return total

    suppressed = set()
    for f in grouped.get("suppress_stage", []):
        suppressed.add(dict(f.params)["stage"])
        triggered.append(f.mode_id)

    truncations = [int(dict(f.params)["keep"])
                   for f in grouped.get("prompt_truncation", [])]
    for f in grouped.get("prompt_truncation", []):
        triggered.append(f.mode_id)

    def resolve(at, clock):
        if isinstance(at, str):
            return events[at]
        return float(at) if at is not None else clock

    clock = 0.0
    latencies = []
    answers = []
    stage_times = []
    outcome = None
    for stage in scenario.stages:
        sid = stage["id"]
        if sid in suppressed:
            continue
        kind = stage["kind"]
        if kind == "auto":
            clock = max(clock, resolve(stage.get("at"), clock))
            stage_times.append((sid, clock))
            if stage.get("terminal"):
                outcome = AVERTED
                break
        elif kind == "notify":
            clock = max(clock, resolve(stage.get("at"), clock)) + stage_delays(sid)
            stage_times.append((sid, clock))
        elif kind == "respond":
            prompt = stage.get("prompt", "")
            for keep in truncations:
                prompt = prompt[:keep]
            context = QueryContext(query_index=len(answers), elapsed_time=clock,
                                   suggested_default=stage.get("default"),
                                   hazard_flag=bool(stage.get("hazard", False)))
            answer = human.answer(prompt, context)
            delay = (human.response_delay(prompt, context) + extra_reaction
                     + stage_delays(sid))
            clock += delay
            latencies.append(delay)
            answers.append("!" if answer is STOP else answer)
            stage_times.append((sid, clock))
            if answer is STOP:
                outcome = ABORTED
                break
        else:  # fixed
            clock += float(stage["duration"]) + stage_delays(sid)
            stage_times.append((sid, clock))

    if outcome is None:
        outcome = _judge(scenario.harm, events, dict(stage_times), clock, answers)

    # de-duplicate, preserving first-trigger order
    seen = set()
    modes = [m for m in triggered if not (m in seen or seen.add(m))]
    return TrialRecord(seed=seed, outcome=outcome,
                       response_latency=tuple(latencies),
                       triggered_modes=tuple(modes), answers=tuple(answers),
                       final_time=clock, stage_times=tuple(stage_times),
                       rewrites=tuple(rewrites))


def _judge(harm, events, stage_times, clock, answers):
    if harm.kind == "deadline_miss":
        deadline = events[harm.deadline_event]
        responded_at = stage_times.get(harm.response_stage)
        if responded_at is None:
            return HARM  # the judged stage never ran
        # answered on the deadline still counts: pre-deadline iff r <= lead
        return AVERTED if responded_at <= deadline else HARM
    if harm.kind == "threshold":
        return AVERTED if clock <= harm.limit else HARM
    # wrong_answer
    if not answers:
        return HARM
    return COMPLETED if answers[-1] == harm.intent else HARM


# --- Monte Carlo -------------------------------------------------------------

def wilson_interval(successes, n, z=1.959963984540054):
    """Wilson score 95% interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    margin = (z / denom) * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return (max(0.0, center - margin), min(1.0, center + margin))


@dataclass(frozen=True)
class MonteCarloSummary:
    trials: int
    master_seed: int
    rates: tuple  # (outcome, count, rate, low, high)
    attribution: tuple  # (mode_id, category_id, decisive_count)
    notes: tuple = ()

    def rate_of(self, outcome):
        for oc, _count, rate, _lo, _hi in self.rates:
            if oc == outcome:
                return rate
        return 0.0

    def to_json(self):
        return {"trials": self.trials, "master_seed": self.master_seed,
                "rates": [{"outcome": oc, "count": c, "rate": r,
                           "wilson_low": lo, "wilson_high": hi}
                          for oc, c, r, lo, hi in self.rates],
                "attribution": [{"mode_id": m, "category_id": cat, "decisive": n}
                                for m, cat, n in self.attribution],
                "notes": list(self.notes)}


def monte_carlo(scenario, trials, master_seed, attribute_trials=True):
    """Seeded trial batch with outcome rates and decisive-mode counts.

    Trial i runs with seed derive_seed(master_seed, i), so any subset of
    trials can be recomputed independently and in any order.
    """
    if trials < 1:
        raise ScenarioError("trials must be >= 1")
    records = [simulate_timed(scenario, derive_seed(master_seed, i))
               for i in range(trials)]
    counts = {}
    for r in records:
        counts[r.outcome] = counts.get(r.outcome, 0) + 1
    rates = []
    for outcome in sorted(counts):
        c = counts[outcome]
        lo, hi = wilson_interval(c, trials)
        rates.append((outcome, c, c / trials, lo, hi))

    decisive_counts = {}
    if attribute_trials:
        for r in records:
            for mode_id, decisive in attribute(r, scenario):
                if decisive:
                    decisive_counts[mode_id] = decisive_counts.get(mode_id, 0) + 1
    attribution = tuple(sorted(
        (mode_id, _CATALOG.mode(mode_id).category_id, n)
        for mode_id, n in decisive_counts.items()))

    notes = []
    if trials == 1:
        notes.append("single trial: Wilson interval is degenerate")
    return records, MonteCarloSummary(trials=trials, master_seed=master_seed,
                                      rates=tuple(rates), attribution=attribution,
                                      notes=tuple(notes))


def attribute(trial, scenario):
    """Single-fault ablation: decisive iff disabling the fault flips the outcome."""
    results = []
    for fault in scenario.faults:
        if not fault.mode.ablatable:
            continue
        ablated = simulate_timed(scenario.without_fault(fault), trial.seed)
        results.append((fault.mode_id, ablated.outcome != trial.outcome))
    return results
