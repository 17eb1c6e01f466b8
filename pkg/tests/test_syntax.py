import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LISTINGS, random_ast
from lambdapa.syntax import (
    Free, IntLit, Let, MutBorrow, New, ParseError, Read, ScopeError, Seq, ShrBorrow,
    Var, Write, check_scopes, parse, pretty, walk,
)


def test_parse_let_new_free():
    assert parse("let x := new(42) in free(x)") == Let("x", New(IntLit(42)), Free(Var("x")))


def test_parse_write():
    assert parse("*y := 5") == Write(Var("y"), IntLit(5))


def test_parse_literal():
    assert parse("42") == IntLit(42)


def test_let_accepts_equals_sign():
    assert parse("let x = new(42) in x") == parse("let x := new(42) in x")


def test_borrow_forms():
    assert parse("&mut *x") == MutBorrow(Var("x"))
    assert parse("&*x") == ShrBorrow(Var("x"))
    assert parse("&mut*x") == MutBorrow(Var("x"))


@pytest.mark.parametrize("text", ["&x", "&mut x", "x := 1", "let in 3", "new 3", "(1", "1;", "*", "#"])
def test_malformed_input(text):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.span.line == 1


def test_parse_error_reports_expected_tokens():
    with pytest.raises(ParseError) as info:
        parse("let x := 1 4")
    assert "in" in info.value.expected
    assert info.value.span.column == 12


def test_comments_ignored():
    assert parse("// header\n*y := 5 // UB!\n") == Write(Var("y"), IntLit(5))


def test_big_integers():
    n = 10**40
    assert parse(str(n)) == IntLit(n)
    assert pretty(IntLit(-3)) == "-3"


@pytest.mark.parametrize("expr,text", [
    (IntLit(42), "42"),
    (Write(Var("x"), IntLit(44)), "*x := 44"),
    (Let("x", New(IntLit(0)), Free(Var("x"))), "let x := new(0) in free(x)"),
])
def test_pretty(expr, text):
    assert pretty(expr) == text


def test_seq_is_right_associative():
    assert parse("a; b; c") == Seq(Var("a"), Seq(Var("b"), Var("c")))
    assert pretty(Seq(Seq(Var("a"), Var("b")), Var("c"))) == "(a; b); c"


def test_semicolon_binds_looser_than_assignment():
    assert parse("*x := 1; *y := 2") == Seq(Write(Var("x"), IntLit(1)), Write(Var("y"), IntLit(2)))


def test_let_extends_maximally():
    e = parse("let x := 1 in x; x")
    assert e == Let("x", IntLit(1), Seq(Var("x"), Var("x")))
    assert pretty(Seq(Let("x", IntLit(1), Var("x")), Var("y"))) == "(let x := 1 in x); y"


def test_assignment_is_right_associative():
    assert parse("*x := *y := 2") == Write(Var("x"), Write(Var("y"), IntLit(2)))


def test_spans_are_byte_accurate():
    text = "let x := new(42) in\n  *x := 43"
    e = parse(text)
    write = e.body
    assert (write.span.line, write.span.column) == (2, 3)
    assert text[write.span.offset:write.span.offset + write.span.length] == "*x := 43"
    assert text[e.bound.span.offset:][:e.bound.span.length] == "new(42)"


def test_scopes_ok():
    check_scopes(Let("x", IntLit(1), Var("x")))


def test_scope_error():
    with pytest.raises(ScopeError) as info:
        check_scopes(Var("x"))
    assert info.value.name == "x"


def test_scope_error_span():
    with pytest.raises(ScopeError) as info:
        check_scopes(parse("let x := 1 in\ny"))
    assert (info.value.span.line, info.value.span.column) == (2, 1)


def test_let_does_not_scope_over_its_own_bound():
    with pytest.raises(ScopeError):
        check_scopes(parse("let x := x in 1"))


def test_listings_are_closed():
    for path in LISTINGS.glob("*.lpa"):
        check_scopes(parse(path.read_text()))


def test_parsing_is_deterministic():
    text = (LISTINGS / "shared_ref.lpa").read_text()
    assert parse(text) == parse(text)
    with pytest.raises(ParseError) as a:
        parse("let x := &x in x")
    with pytest.raises(ParseError) as b:
        parse("let x := &x in x")
    assert a.value.span == b.value.span


names = st.sampled_from(["x", "y", "z", "a1", "_q"])
leaves = st.one_of(st.integers(min_value=-10**20, max_value=10**20).map(IntLit), names.map(Var))
exprs = st.recursive(
    leaves,
    lambda sub: st.one_of(
        sub.map(New), sub.map(Free), sub.map(Read), sub.map(MutBorrow), sub.map(ShrBorrow),
        st.builds(Write, sub, sub),
        st.builds(Let, names, sub, sub),
        st.builds(Seq, sub, sub),
    ),
    max_leaves=25,
)


@settings(max_examples=400)
@given(exprs)
def test_round_trip_property(e):
    assert parse(pretty(e)) == e


def test_every_span_reparses_to_its_node():
    rng = random.Random(5)
    for _ in range(200):
        text = pretty(random_ast(rng, 5))
        for node in walk(parse(text)):
            s = node.span
            assert parse(text[s.offset:s.offset + s.length]) == node


def test_round_trip_random_trees():
    rng = random.Random(11)
    for _ in range(500):
        e = random_ast(rng, 6)
        assert parse(pretty(e)) == e
