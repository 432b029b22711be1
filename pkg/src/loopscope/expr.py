"""Typed expression language used by process-machine nodes.

Values are plain Python: ints for bounded-int domains, strings for words
and enum labels, bools for branch conditions.  Integer arithmetic wraps
modulo the declared domain size so every expression is total.  Word
encoding is positional base-|alphabet| with the alphabet symbols as
digits, minimal length ("word(0)" is the single first symbol).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import ExprError


# --- domains -----------------------------------------------------------------

@dataclass(frozen=True)
class IntDomain:
    size: int  # values 0 .. size-1

    def values(self):
        return range(self.size)

    def contains(self, v):
        return isinstance(v, int) and not isinstance(v, bool) and 0 <= v < self.size

    def to_json(self):
        return {"kind": "int", "size": self.size}


@dataclass(frozen=True)
class EnumDomain:
    labels: tuple

    def values(self):
        return self.labels

    def contains(self, v):
        return v in self.labels

    def to_json(self):
        return {"kind": "enum", "values": list(self.labels)}


@dataclass(frozen=True)
class WordDomain:
    """All words over the machine alphabet up to max_answer_len."""

    def to_json(self):
        return {"kind": "word"}


def domain_from_json(obj):
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ExprError(f"malformed domain: {obj!r}")
    kind = obj["kind"]
    if kind == "int":
        size = obj.get("size")
        if not isinstance(size, int) or size < 1:
            raise ExprError(f"int domain needs a positive size, got {size!r}")
        _reject_unknown(obj, {"kind", "size"})
        return IntDomain(size)
    if kind == "enum":
        values = obj.get("values")
        if not values or not all(isinstance(v, str) for v in values):
            raise ExprError("enum domain needs a nonempty list of string values")
        if len(set(values)) != len(values):
            raise ExprError("enum domain has duplicate values")
        _reject_unknown(obj, {"kind", "values"})
        return EnumDomain(tuple(values))
    if kind == "word":
        _reject_unknown(obj, {"kind"})
        return WordDomain()
    raise ExprError(f"unknown domain kind {kind!r}")


def _reject_unknown(obj, allowed):
    extra = set(obj) - allowed
    if extra:
        raise ExprError(f"unknown keys {sorted(extra)} in {obj!r}")


# --- types -------------------------------------------------------------------

@dataclass(frozen=True)
class TInt:
    size: int | None  # None: unsized literal/derived int


@dataclass(frozen=True)
class TWord:
    pass


@dataclass(frozen=True)
class TBool:
    pass


@dataclass(frozen=True)
class TEnum:
    labels: tuple


def _type_of_domain(dom):
    if isinstance(dom, IntDomain):
        return TInt(dom.size)
    if isinstance(dom, EnumDomain):
        return TEnum(dom.labels)
    return TWord()


# --- AST ---------------------------------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Str:
    value: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple


# --- parser ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<num>\d+)
      | (?P<str>"[^"]*")
      | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<op>==|!=|<=|>=|[-+*<>()!,])
    )""",
    re.VERBOSE,
)

_KEYWORDS = {"and", "or", "not"}
_FUNCTIONS = {"concat", "word", "int", "len"}


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ExprError(f"cannot tokenize {rest[:10]!r} in expression {text!r}")
        pos = m.end()
        if m.lastgroup == "num":
            tokens.append(("num", int(m.group("num"))))
        elif m.lastgroup == "str":
            tokens.append(("str", m.group("str")[1:-1]))
        elif m.lastgroup == "name":
            name = m.group("name")
            tokens.append(("kw" if name in _KEYWORDS else "name", name))
        else:
            tokens.append(("op", m.group("op")))
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ExprError(f"expected {op!r} in expression {self.text!r}, got {val!r}")

    def parse(self):
        e = self.parse_or()
        kind, val = self.peek()
        if kind != "end":
            raise ExprError(f"trailing input {val!r} in expression {self.text!r}")
        return e

    def parse_or(self):
        e = self.parse_and()
        while self.peek() == ("kw", "or"):
            self.take()
            e = Bin("or", e, self.parse_and())
        return e

    def parse_and(self):
        e = self.parse_not()
        while self.peek() == ("kw", "and"):
            self.take()
            e = Bin("and", e, self.parse_not())
        return e

    def parse_not(self):
        if self.peek() == ("kw", "not"):
            self.take()
            return Unary("not", self.parse_not())
        return self.parse_cmp()

    def parse_cmp(self):
        e = self.parse_add()
        kind, val = self.peek()
        if kind == "op" and val in ("==", "!=", "<", "<=", ">", ">="):
            self.take()
            e = Bin(val, e, self.parse_add())
        return e

    def parse_add(self):
        e = self.parse_mul()
        while True:
            kind, val = self.peek()
            if kind == "op" and val in ("+", "-"):
                self.take()
                e = Bin(val, e, self.parse_mul())
            else:
                return e

    def parse_mul(self):
        e = self.parse_unary()
        while self.peek() == ("op", "*"):
            self.take()
            e = Bin("*", e, self.parse_unary())
        return e

    def parse_unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return Unary("-", self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        kind, val = self.take()
        if kind == "num":
            return Lit(val)
        if kind == "str":
            return Str(val)
        if kind == "name":
            if self.peek() == ("op", "("):
                self.take()
                args = []
                if self.peek() != ("op", ")"):
                    args.append(self.parse_or())
                    while self.peek() == ("op", ","):
                        self.take()
                        args.append(self.parse_or())
                self.expect_op(")")
                if val not in _FUNCTIONS:
                    raise ExprError(f"unknown function {val!r}")
                return Call(val, tuple(args))
            return Var(val)
        if kind == "op" and val == "(":
            e = self.parse_or()
            self.expect_op(")")
            return e
        raise ExprError(f"unexpected token {val!r} in expression {self.text!r}")


def parse_expr(text):
    if not isinstance(text, str):
        raise ExprError(f"expression must be a string, got {text!r}")
    return _Parser(text).parse()


# --- type checking -----------------------------------------------------------

def _merge_int(a, b, ctx):
    if a.size is None:
        return b
    if b.size is None or b.size == a.size:
        return a
    raise ExprError(f"mixed int domain sizes {a.size} and {b.size} in {ctx}")


class TypeChecker:
    """Checks an expression against variable domains.

    ``env`` maps variable name to a domain.  ``alphabet`` and
    ``max_answer_len`` scope word literals and word operations.
    """

    def __init__(self, env, alphabet, max_answer_len):
        self.env = env
        self.alphabet = alphabet
        self.max_answer_len = max_answer_len

    def check(self, expr):
        if isinstance(expr, Lit):
            return TInt(None)
        if isinstance(expr, Str):
            # A bare string literal is a word; enum labels are accepted
            # contextually in comparisons below.
            self._check_word_literal(expr.value)
            return TWord()
        if isinstance(expr, Var):
            if expr.name not in self.env:
                raise ExprError(f"unbound variable {expr.name!r}")
            return _type_of_domain(self.env[expr.name])
        if isinstance(expr, Unary):
            t = self.check(expr.operand)
            if expr.op == "not":
                if not isinstance(t, TBool):
                    raise ExprError("'not' needs a boolean operand")
                return TBool()
            if not isinstance(t, TInt):
                raise ExprError("unary '-' needs an int operand")
            return t
        if isinstance(expr, Bin):
            return self._check_bin(expr)
        if isinstance(expr, Call):
            return self._check_call(expr)
        raise ExprError(f"unknown expression node {expr!r}")

    def _check_word_literal(self, s):
        bad = [c for c in s if c not in self.alphabet.symbols]
        if bad:
            raise ExprError(f"word literal {s!r} uses symbols {bad} outside the alphabet")
        if len(s) > self.max_answer_len:
            raise ExprError(f"word literal {s!r} exceeds max_answer_len {self.max_answer_len}")

    def _check_bin(self, expr):
        if expr.op in ("and", "or"):
            lt, rt = self.check(expr.left), self.check(expr.right)
            if not (isinstance(lt, TBool) and isinstance(rt, TBool)):
                raise ExprError(f"{expr.op!r} needs boolean operands")
            return TBool()
        if expr.op in ("+", "-", "*"):
            lt, rt = self.check(expr.left), self.check(expr.right)
            if not (isinstance(lt, TInt) and isinstance(rt, TInt)):
                raise ExprError(f"{expr.op!r} needs int operands")
            return _merge_int(lt, rt, expr.op)
        # comparisons
        lt, rt = self._check_cmp_side(expr.left, expr.right)
        if expr.op in ("<", "<=", ">", ">="):
            if not (isinstance(lt, TInt) and isinstance(rt, TInt)):
                raise ExprError(f"{expr.op!r} needs int operands")
        return TBool()

    def _check_cmp_side(self, left, right):
        # Allow string literals to take the enum type of the other side.
        lt_enum = isinstance(left, Var) and isinstance(self.env.get(left.name), EnumDomain)
        rt_enum = isinstance(right, Var) and isinstance(self.env.get(right.name), EnumDomain)
        if lt_enum and isinstance(right, Str):
            lt = self.check(left)
            if right.value not in lt.labels:
                raise ExprError(f"{right.value!r} is not a label of the enum domain")
            return lt, lt
        if rt_enum and isinstance(left, Str):
            rt = self.check(right)
            if left.value not in rt.labels:
                raise ExprError(f"{left.value!r} is not a label of the enum domain")
            return rt, rt
        lt, rt = self.check(left), self.check(right)
        if isinstance(lt, TInt) and isinstance(rt, TInt):
            _merge_int(lt, rt, "comparison")
            return lt, rt
        if type(lt) is type(rt):
            return lt, rt
        raise ExprError(f"cannot compare {lt} with {rt}")

    def _check_call(self, expr):
        if expr.fn == "concat":
            if len(expr.args) != 2:
                raise ExprError("concat takes two word arguments")
            for a in expr.args:
                if not isinstance(self.check(a), TWord):
                    raise ExprError("concat takes word arguments")
            return TWord()
        if expr.fn == "word":
            if len(expr.args) != 1 or not isinstance(self.check(expr.args[0]), TInt):
                raise ExprError("word() takes one int argument")
            return TWord()
        if expr.fn == "int":
            if len(expr.args) != 1 or not isinstance(self.check(expr.args[0]), TWord):
                raise ExprError("int() takes one word argument")
            return TInt(None)
        if expr.fn == "len":
            if len(expr.args) != 1 or not isinstance(self.check(expr.args[0]), TWord):
                raise ExprError("len() takes one word argument")
            return TInt(None)
        raise ExprError(f"unknown function {expr.fn!r}")


# --- evaluation --------------------------------------------------------------

def encode_word(n, alphabet, max_answer_len):
    """Minimal-length base-b encoding of a nonneg int; wraps modulo b**L."""
    base = len(alphabet.symbols)
    n %= base ** max_answer_len
    if n == 0:
        return alphabet.symbols[0]
    digits = []
    while n:
        digits.append(alphabet.symbols[n % base])
        n //= base
    return "".join(reversed(digits))


def decode_word(w, alphabet):
    """Base-b decode with the alphabet symbols as digits; empty word is 0."""
    base = len(alphabet.symbols)
    index = {c: i for i, c in enumerate(alphabet.symbols)}
    n = 0
    for c in w:
        n = n * base + index[c]
    return n


class Evaluator:
    """Evaluates type-checked expressions against a variable store.

    Total over in-domain stores: arithmetic wraps, concatenation truncates
    at max_answer_len.  Int results are wrapped against ``wrap_size`` (the
    merged domain size of the expression) when one is known.
    """

    def __init__(self, env, alphabet, max_answer_len):
        self.env = env
        self.alphabet = alphabet
        self.max_answer_len = max_answer_len

    def eval(self, expr, store):
        v, _ = self._eval(expr, store)
        return v

    def _eval(self, expr, store):
        # returns (value, int-size-or-None)
        if isinstance(expr, Lit):
            return expr.value, None
        if isinstance(expr, Str):
            return expr.value, None
        if isinstance(expr, Var):
            dom = self.env[expr.name]
            size = dom.size if isinstance(dom, IntDomain) else None
            return store[expr.name], size
        if isinstance(expr, Unary):
            v, size = self._eval(expr.operand, store)
            if expr.op == "not":
                return (not v), None
            v = -v
            if size is not None:
                v %= size
            return v, size
        if isinstance(expr, Bin):
            return self._eval_bin(expr, store)
        if isinstance(expr, Call):
            return self._eval_call(expr, store)
        raise ExprError(f"unknown expression node {expr!r}")

    def _eval_bin(self, expr, store):
        if expr.op == "and":
            lv, _ = self._eval(expr.left, store)
            if not lv:
                return False, None
            rv, _ = self._eval(expr.right, store)
            return bool(rv), None
        if expr.op == "or":
            lv, _ = self._eval(expr.left, store)
            if lv:
                return True, None
            rv, _ = self._eval(expr.right, store)
            return bool(rv), None
        lv, lsize = self._eval(expr.left, store)
        rv, rsize = self._eval(expr.right, store)
        size = lsize if lsize is not None else rsize
        if expr.op in ("+", "-", "*"):
            v = {"+": lv + rv, "-": lv - rv, "*": lv * rv}[expr.op]
            if size is not None:
                v %= size
            return v, size
        if size is not None and isinstance(lv, int) and isinstance(rv, int):
            lv %= size
            rv %= size
        if expr.op == "==":
            return lv == rv, None
        if expr.op == "!=":
            return lv != rv, None
        if expr.op == "<":
            return lv < rv, None
        if expr.op == "<=":
            return lv <= rv, None
        if expr.op == ">":
            return lv > rv, None
        if expr.op == ">=":
            return lv >= rv, None
        raise ExprError(f"unknown operator {expr.op!r}")

    def _eval_call(self, expr, store):
        if expr.fn == "concat":
            a, _ = self._eval(expr.args[0], store)
            b, _ = self._eval(expr.args[1], store)
            return (a + b)[: self.max_answer_len], None
        if expr.fn == "word":
            n, _ = self._eval(expr.args[0], store)
            return encode_word(n, self.alphabet, self.max_answer_len), None
        if expr.fn == "int":
            w, _ = self._eval(expr.args[0], store)
            return decode_word(w, self.alphabet), None
        if expr.fn == "len":
            w, _ = self._eval(expr.args[0], store)
            return len(w), None
        raise ExprError(f"unknown function {expr.fn!r}")
