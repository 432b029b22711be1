"""Oracle strategies: the function the human plays.

A strategy maps (prompt, context) to an answer, where an answer is either
a word over the machine alphabet or the STOP token.  Deterministic
strategies return identical answers for identical inputs; stochastic ones
draw all randomness from a counter-based generator keyed per query, so
answer sequences are reproducible and evaluation-order independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DomainError
from .ir import STOP, enumerate_words
from .rng import CounterRNG


@dataclass(frozen=True)
class QueryContext:
    query_index: int = 0
    elapsed_time: float = 0.0
    suggested_default: str | None = None
    hazard_flag: bool = False


class OracleStrategy:
    """Base strategy; subclasses implement answer()."""

    descriptor = "oracle"
    deterministic = True

    def answer(self, prompt, context):
        raise NotImplementedError

    def response_delay(self, prompt, context):
        """Simulated seconds from query issue to answer; 0 for abstract oracles."""
        return 0.0

    def __repr__(self):
        return f"<{type(self).__name__} {self.descriptor}>"


class ScriptedOracle(OracleStrategy):
    """Answers from a fixed script; repeats the final entry when exhausted."""

    def __init__(self, script):
        if not script:
            raise DomainError("script must be nonempty")
        self.script = list(script)
        self.descriptor = f"scripted[{len(self.script)}]"

    def answer(self, prompt, context):
        i = min(context.query_index, len(self.script) - 1)
        return self.script[i]


def scripted_answer(script):
    return ScriptedOracle(script)


class ConstantOracle(OracleStrategy):
    def __init__(self, word):
        self.word = word
        self.descriptor = f"constant[{word!r}]"

    def answer(self, prompt, context):
        return self.word


def constant_answer(word):
    return ConstantOracle(word)


class ThresholdOracle(OracleStrategy):
    """Deterministic accept/reject on the prompt decoded as an integer score.

    The prompt is decoded base-|alphabet|.  An empty prompt carries no
    score: the oracle rejects and records a decode miss.
    """

    def __init__(self, threshold, accept, reject, alphabet):
        if accept == reject:
            raise DomainError("accept and reject words must differ")
        self.threshold = threshold
        self.accept = accept
        self.reject = reject
        self.alphabet = alphabet
        self.decode_misses = []  # diagnostic only; does not affect answers
        self.descriptor = f"threshold[>={threshold}]"

    def answer(self, prompt, context):
        from .expr import decode_word

        if prompt == "":
            self.decode_misses.append(context.query_index)
            return self.reject
        score = decode_word(prompt, self.alphabet)
        return self.accept if score >= self.threshold else self.reject


def threshold_human(threshold, accept, reject, alphabet):
    return ThresholdOracle(threshold, accept, reject, alphabet)


# --- stochastic human model --------------------------------------------------

@dataclass(frozen=True)
class ReactionTime:
    kind: str = "fixed"  # fixed | uniform | truncnorm
    value: float = 0.0
    low: float = 0.0
    high: float = 0.0
    mu: float = 0.0
    sigma: float = 0.0
    minimum: float = 0.0

    @classmethod
    def from_json(cls, obj):
        kind = obj.get("kind", "fixed")
        if kind == "fixed":
            return cls(kind="fixed", value=float(obj.get("value", 0.0)))
        if kind == "uniform":
            return cls(kind="uniform", low=float(obj["low"]), high=float(obj["high"]))
        if kind == "truncnorm":
            return cls(kind="truncnorm", mu=float(obj["mu"]), sigma=float(obj["sigma"]),
                       minimum=float(obj.get("min", 0.0)))
        raise DomainError(f"unknown reaction-time kind {kind!r}")

    def to_json(self):
        if self.kind == "fixed":
            return {"kind": "fixed", "value": self.value}
        if self.kind == "uniform":
            return {"kind": "uniform", "low": self.low, "high": self.high}
        return {"kind": "truncnorm", "mu": self.mu, "sigma": self.sigma, "min": self.minimum}

    def sample(self, rng):
        if self.kind == "fixed":
            return self.value
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * rng.uniform()
        return rng.truncated_normal(self.mu, self.sigma, self.minimum)


@dataclass(frozen=True)
class Attention:
    """Two-state Markov chain (attentive/distracted) with per-second rates."""

    p_distract: float = 0.0
    p_recover: float = 1.0
    warmup: float = 0.0  # seconds of unattended operation before t=0

    def distracted_probability(self, t):
        # Closed form for the chain started attentive at -warmup.
        total = self.p_distract + self.p_recover
        if total <= 0:
            return 0.0
        stationary = self.p_distract / total
        elapsed = max(0.0, t + self.warmup)
        decay = (1.0 - total) ** elapsed if total < 1 else 0.0
        return stationary * (1.0 - decay)


@dataclass(frozen=True)
class Fatigue:
    eps0: float = 0.0
    gamma: float = 0.0
    eps_max: float = 1.0

    def error_rate(self, query_count):
        return min(self.eps0 + self.gamma * query_count, self.eps_max)


@dataclass(frozen=True)
class HumanModelParams:
    reaction: ReactionTime = field(default_factory=ReactionTime)
    attention: Attention = field(default_factory=Attention)
    automation_bias: float = 0.0
    fatigue: Fatigue = field(default_factory=Fatigue)
    courage: float = 0.0
    seed_stream: str = "human"

    def __post_init__(self):
        for label, p in (("automation_bias", self.automation_bias),
                         ("courage", self.courage),
                         ("p_distract", self.attention.p_distract),
                         ("p_recover", self.attention.p_recover),
                         ("eps0", self.fatigue.eps0),
                         ("eps_max", self.fatigue.eps_max)):
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"{label} must be a probability, got {p}")

    @classmethod
    def from_json(cls, obj):
        att = obj.get("attention", {})
        fat = obj.get("fatigue", {})
        return cls(
            reaction=ReactionTime.from_json(obj.get("reaction", {"kind": "fixed", "value": 0.0})),
            attention=Attention(p_distract=float(att.get("p_distract", 0.0)),
                                p_recover=float(att.get("p_recover", 1.0)),
                                warmup=float(att.get("warmup", 0.0))),
            automation_bias=float(obj.get("automation_bias", 0.0)),
            fatigue=Fatigue(eps0=float(fat.get("eps0", 0.0)),
                            gamma=float(fat.get("gamma", 0.0)),
                            eps_max=float(fat.get("eps_max", 1.0))),
            courage=float(obj.get("courage", 0.0)),
            seed_stream=obj.get("seed_stream", "human"),
        )

    def to_json(self):
        return {
            "reaction": self.reaction.to_json(),
            "attention": {"p_distract": self.attention.p_distract,
                          "p_recover": self.attention.p_recover,
                          "warmup": self.attention.warmup},
            "automation_bias": self.automation_bias,
            "fatigue": {"eps0": self.fatigue.eps0, "gamma": self.fatigue.gamma,
                        "eps_max": self.fatigue.eps_max},
            "courage": self.courage,
            "seed_stream": self.seed_stream,
        }


class StochasticHuman(OracleStrategy):
    """Human model with reaction time, attention, bias, fatigue, and courage.

    Per query, in order: with probability ``courage`` return STOP when the
    hazard flag is set; with probability ``automation_bias`` return the
    suggested default when present; with probability eps(k) return a
    uniformly random wrong answer; otherwise return the intent strategy's
    answer.  All draws are keyed by (seed, query index).
    """

    deterministic = False

    def __init__(self, params, seed, intent, alphabet, max_answer_len):
        self.params = params
        self.seed = seed
        self.intent = intent
        self.alphabet = alphabet
        self.max_answer_len = max_answer_len
        self._words = [w for w in enumerate_words(alphabet, max_answer_len)]
        self.descriptor = f"stochastic-human[seed={seed}]"

    def _rng(self, context, purpose):
        return CounterRNG(self.params.seed_stream, self.seed, context.query_index, purpose)

    def answer(self, prompt, context):
        if context.hazard_flag:
            if self._rng(context, "courage").uniform() < self.params.courage:
                return STOP
        if context.suggested_default is not None:
            if self._rng(context, "bias").uniform() < self.params.automation_bias:
                return context.suggested_default
        intended = self.intent.answer(prompt, context)
        eps = self.params.fatigue.error_rate(context.query_index)
        rng = self._rng(context, "fatigue")
        if rng.uniform() < eps:
            wrong = [w for w in self._words if w != intended]
            if wrong:
                return rng.choice(wrong)
        return intended

    def response_delay(self, prompt, context):
        delay = self.params.reaction.sample(self._rng(context, "reaction"))
        att = self.params.attention
        rng = self._rng(context, "attention")
        if rng.uniform() < att.distracted_probability(context.elapsed_time):
            recovery = rng.geometric(att.p_recover)
            delay += recovery if recovery != float("inf") else 1e9
        return delay


def stochastic_human(params, seed, intent=None, alphabet=None, max_answer_len=1):
    if intent is None:
        intent = constant_answer("")
    if alphabet is None:
        from .ir import Alphabet
        alphabet = Alphabet(("0", "1"))
    return StochasticHuman(params, seed, intent, alphabet, max_answer_len)


def enumeration_answers(alphabet, max_answer_len):
    """All words in length-then-lex order, followed by STOP."""
    return list(enumerate_words(alphabet, max_answer_len)) + [STOP]
