import pytest
from hypothesis import given, strategies as st

from loopscope.errors import ExprError
from loopscope.expr import (
    EnumDomain,
    Evaluator,
    IntDomain,
    TBool,
    TInt,
    TWord,
    TypeChecker,
    WordDomain,
    decode_word,
    domain_from_json,
    encode_word,
    parse_expr,
)
from loopscope.ir import Alphabet

BIN = Alphabet(("0", "1"))
TRI = Alphabet(("0", "1", "2"))


def _env():
    return {"x": IntDomain(8), "y": IntDomain(8), "w": WordDomain(),
            "e": EnumDomain(("red", "green"))}


def _check(src, env=None):
    env = env or _env()
    return TypeChecker(env, BIN, 3).check(parse_expr(src))


def _eval(src, store, env=None, alphabet=BIN, max_len=3):
    env = env or _env()
    ast = parse_expr(src)
    TypeChecker(env, alphabet, max_len).check(ast)
    return Evaluator(env, alphabet, max_len).eval(ast, store)


class TestDomains:
    def test_int_domain_values(self):
        assert list(IntDomain(3).values()) == [0, 1, 2]
        assert IntDomain(3).contains(2)
        assert not IntDomain(3).contains(3)
        assert not IntDomain(3).contains(True)

    def test_enum_domain(self):
        d = EnumDomain(("a", "b"))
        assert d.contains("a") and not d.contains("c")

    def test_domain_from_json_roundtrip(self):
        for obj in ({"kind": "int", "size": 5},
                    {"kind": "enum", "values": ["x", "y"]},
                    {"kind": "word"}):
            assert domain_from_json(obj).to_json() == obj

    def test_domain_rejects_junk(self):
        with pytest.raises(ExprError):
            domain_from_json({"kind": "int", "size": 0})
        with pytest.raises(ExprError):
            domain_from_json({"kind": "enum", "values": ["x", "x"]})
        with pytest.raises(ExprError):
            domain_from_json({"kind": "word", "extra": 1})
        with pytest.raises(ExprError):
            domain_from_json({"kind": "float"})


class TestParser:
    def test_precedence(self):
        # 1 + 2 * 3 evaluates multiplicatively first
        assert _eval("1 + 2 * 3", {}) == 7

    def test_parentheses(self):
        assert _eval("(1 + 2) * 2", {}) == 6

    def test_boolean_operators(self):
        assert _eval('1 < 2 and not (2 < 1)', {}) is True
        assert _eval('1 > 2 or 3 > 2', {}) is True

    def test_trailing_garbage_rejected(self):
        with pytest.raises(ExprError):
            parse_expr("1 + 2 )")

    def test_unknown_function_rejected(self):
        with pytest.raises(ExprError):
            parse_expr("frob(1)")

    def test_tokenizer_rejects_junk(self):
        with pytest.raises(ExprError):
            parse_expr("x $ y")


class TestTypeChecker:
    def test_int_arithmetic_types(self):
        assert _check("x + y") == TInt(8)
        assert _check("x + 1") == TInt(8)

    def test_mixed_sizes_rejected(self):
        env = _env() | {"z": IntDomain(4)}
        with pytest.raises(ExprError):
            _check("x + z", env)

    def test_word_literal_scope(self):
        with pytest.raises(ExprError):
            _check('"2"')  # symbol outside the alphabet
        with pytest.raises(ExprError):
            _check('"0000"')  # longer than max answer length

    def test_enum_contextual_literal(self):
        assert _check('e == "red"') == TBool()
        with pytest.raises(ExprError):
            _check('e == "blue"')

    def test_cross_type_comparison_rejected(self):
        with pytest.raises(ExprError):
            _check("w == x")

    def test_functions(self):
        assert _check("concat(w, w)") == TWord()
        assert _check("word(x)") == TWord()
        assert _check("int(w)") == TInt(None)
        assert _check("len(w)") == TInt(None)
        with pytest.raises(ExprError):
            _check("word(w)")


class TestEvaluator:
    def test_addition_wraps_at_domain_size(self):
        assert _eval("x + 1", {"x": 7}) == 0

    def test_subtraction_wraps(self):
        assert _eval("x - 1", {"x": 0}) == 7

    def test_unary_minus_wraps(self):
        assert _eval("-x", {"x": 3}) == 5

    def test_word_encoding(self):
        assert _eval("word(5)", {"x": 5}) == "101"

    def test_word_zero_is_first_symbol(self):
        assert _eval("word(0)", {}) == "0"
        assert encode_word(0, TRI, 2) == "0"

    def test_word_wraps_past_capacity(self):
        # 8 == 2**3 wraps to 0 at three binary digits
        assert _eval("word(x + 1)", {"x": 7}) == "0"

    def test_concat_truncates(self):
        assert _eval('concat(w, "11")', {"w": "01"}) == "011"

    def test_int_of_word(self):
        assert _eval("int(w)", {"w": "101"}) == 5
        assert decode_word("", BIN) == 0

    def test_len(self):
        assert _eval("len(w)", {"w": "10"}) == 2

    def test_comparisons_normalize_int_domain(self):
        assert _eval("x + 1 == 0", {"x": 7}) is True


@given(n=st.integers(min_value=0, max_value=10_000),
       base=st.integers(min_value=2, max_value=4),
       length=st.integers(min_value=1, max_value=6))
def test_encode_decode_roundtrip(n, base, length):
    alphabet = Alphabet(tuple("0123"[:base]))
    word = encode_word(n, alphabet, length)
    assert 1 <= len(word) <= length
    assert decode_word(word, alphabet) == n % (base ** length)


@given(n=st.integers(min_value=1, max_value=500))
def test_encoding_is_minimal_no_leading_zeros(n):
    word = encode_word(n, BIN, 12)
    assert word[0] != "0" or word == "0"
