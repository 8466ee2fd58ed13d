from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prexpect import corpus, dsl
from prexpect.errors import ElaborationError, ParseError, PrexpectError
from prexpect.parser import (expectation_to_source, parse_bexpr, parse_expectation, parse_program,
                             to_source)
from prexpect.semantics import StateSpace, eval_expectation
from prexpect.syntax import (Abort, And, Assign, BinOp, Call, Cmp, If, Lit, Neg, Not, Or, PChoice,
                             Program, Seq, Skip, UniformAssign, Var, VarDecl, seq)

from conftest import space_of

REC3 = "proc P { {skip} [1/2] {call P; call P; call P} } main { call P }"
COINS = "var x : 0..1; var y : 0..1; main { {x:=0}[1/2]{x:=1}; {y:=0}[1/3]{y:=1} }"


def test_rec3_ast():
    prog = parse_program(REC3)
    body = PChoice(Skip(), Fraction(1, 2), seq(Call("P"), Call("P"), Call("P")))
    assert prog.procs == {"P": body}
    assert prog.main == Call("P")


def test_coins_ast():
    prog = parse_program(COINS)
    x = PChoice(Assign("x", Lit(0)), Fraction(1, 2), Assign("x", Lit(1)))
    y = PChoice(Assign("y", Lit(0)), Fraction(1, 3), Assign("y", Lit(1)))
    assert prog.main == seq(x, y)


def test_unclosed_block_reports_eof():
    with pytest.raises(ParseError) as info:
        parse_program("main { skip")
    assert "end of input" in str(info.value)
    assert info.value.line == 1


def test_error_has_position():
    with pytest.raises(ParseError) as info:
        parse_program("var x : 0..1;\nmain { x := }")
    assert info.value.line == 2 and info.value.column > 1


@pytest.mark.parametrize("src, msg", [
    ("main { x := 1 }", "undeclared"),
    ("main { {skip} [3/2] {skip} }", "probability"),
    ("var x : 3..1; main { skip }", "empty domain"),
    ("main { call Q }", "Q"),
    ("var x : 0..1; var x : 0..2; main { skip }", "x"),
])
def test_elaboration_errors(src, msg):
    with pytest.raises(PrexpectError) as info:
        parse_program(src)
    assert msg in str(info.value)


def test_comments_and_optional_trailing_semicolon():
    prog = parse_program("// header\nvar x : 0..2; main { x := 1; // set\n x := x + 1; }")
    assert prog.main == seq(Assign("x", Lit(1)), Assign("x", BinOp("+", Var("x"), Lit(1))))


def test_expectation_indicator():
    prog = parse_program(COINS)
    sp = space_of(prog)
    e = parse_expectation("[x = y]", prog)
    assert isinstance(e, dsl.EIverson)
    assert list(eval_expectation(e, sp).values) == [1, 0, 0, 1]


def test_expectation_binsearch_bound():
    prog = corpus.load("binsearch")
    e = parse_expectation("3 + [left < right] * (5 * harmonic(right - left + 1) - 5/2)", prog)
    sp = space_of(prog, "binsearch")
    v = eval_expectation(e, sp)
    assert v.at({"left": 0, "right": 1, "mid": 0}) == pytest.approx(3 + 5 * 1.5 - 2.5)
    assert v.at({"left": 2, "right": 2, "mid": 0}) == 3


def test_expectation_zero():
    prog = parse_program(COINS)
    assert np.all(eval_expectation(parse_expectation("0", prog), space_of(prog)).values == 0)


def test_expectation_errors():
    prog = parse_program(COINS)
    with pytest.raises(PrexpectError):
        parse_expectation("[z = 1]", prog)
    with pytest.raises(PrexpectError):
        parse_expectation("n + 1", prog)
    with pytest.raises(PrexpectError):
        parse_expectation("x / y", prog)
    assert parse_expectation("n + 1", prog, allow_index=True) is not None


def test_decimal_literals_are_exact():
    prog = parse_program(COINS)
    e = parse_expectation("0.1", prog)
    assert e.value == Fraction(1, 10)


def test_monus_clamps():
    prog = parse_program(COINS)
    v = eval_expectation(parse_expectation("x - 1", prog), space_of(prog))
    assert v.values.min() == 0


def test_parse_bexpr():
    prog = parse_program(COINS)
    b = parse_bexpr("x < y && !(x = 0) || y >= 1", prog)
    assert isinstance(b, Or) and isinstance(b.left, And)


@pytest.mark.parametrize("name", corpus.names())
def test_corpus_round_trip(name):
    prog = corpus.load(name)
    assert parse_program(to_source(prog)) == prog


# -- random programs -----------------------------------------------------------

VARS = ("x", "y")


def iexprs():
    leaf = st.one_of(st.integers(-3, 3).map(Lit), st.sampled_from(VARS).map(Var))
    return st.recursive(leaf, lambda sub: st.one_of(
        st.tuples(st.sampled_from(["+", "-", "*", "min", "max"]), sub, sub).map(lambda t: BinOp(*t)),
        sub.map(Neg)), max_leaves=5)


def bexprs():
    cmp = st.tuples(st.sampled_from(["<", "<=", "=", "!=", ">", ">="]), iexprs(), iexprs()).map(
        lambda t: Cmp(*t))
    return st.recursive(cmp, lambda sub: st.one_of(
        st.tuples(sub, sub).map(lambda t: And(*t)), st.tuples(sub, sub).map(lambda t: Or(*t)),
        sub.map(Not)), max_leaves=4)


def _flat_seq(cs):
    parts = []
    for c in cs:
        while isinstance(c, Seq):
            parts.append(c.first)
            c = c.second
        parts.append(c)
    return seq(*parts)


def commands():
    atom = st.one_of(
        st.just(Skip()), st.just(Abort()), st.just(Call("P")),
        st.tuples(st.sampled_from(VARS), iexprs()).map(lambda t: Assign(*t)),
        st.tuples(st.sampled_from(VARS), iexprs(), iexprs()).map(lambda t: UniformAssign(*t)))
    probs = st.fractions(0, 1, max_denominator=12)
    return st.recursive(atom, lambda sub: st.one_of(
        st.lists(sub, min_size=2, max_size=3).map(_flat_seq),
        st.tuples(bexprs(), sub, sub).map(lambda t: If(*t)),
        st.tuples(sub, probs, sub).map(lambda t: PChoice(t[0], t[1], t[2]))), max_leaves=8)


@settings(max_examples=150, deadline=None)
@given(commands(), commands())
def test_random_program_round_trip(body, main):
    prog = Program((("P", body),), main, (VarDecl("x", -2, 2), VarDecl("y", 0, 3)))
    again = parse_program(to_source(prog))
    assert again == prog
    assert parse_program(to_source(again)) == again


def expectations():
    prog_leaf = st.one_of(
        st.fractions(0, 5, max_denominator=6).map(dsl.ELit),
        bexprs().map(dsl.EIverson),
        st.sampled_from(VARS).map(lambda v: dsl.ELift(Var(v))))
    return st.recursive(prog_leaf, lambda sub: st.one_of(
        st.tuples(st.sampled_from(["+", "-", "*", "min", "max"]), sub, sub).map(lambda t: dsl.EBin(*t)),
        iexprs().map(dsl.EHarmonic)), max_leaves=5)


@settings(max_examples=150, deadline=None)
@given(expectations())
def test_expectation_round_trip_and_range(e):
    prog = Program((), Skip(), (VarDecl("x", -2, 2), VarDecl("y", 0, 3)))
    text = expectation_to_source(e)
    again = parse_expectation(text, prog)
    assert expectation_to_source(again) == text
    vals = eval_expectation(again, StateSpace.of(prog)).values
    assert np.all(vals >= 0)
