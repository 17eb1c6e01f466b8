"""Lexer, recursive-descent parser, pretty-printer and scope checker for λ_PA.

Surface grammar (``;`` binds loosest and associates to the right, ``let``
extends as far right as possible)::

    expr    ::= 'let' IDENT (':=' | '=') expr 'in' expr
              | assign (';' expr)?
    assign  ::= unary (':=' assign)?        -- lhs must be a dereference
    unary   ::= '*' unary | '&' 'mut' '*' unary | '&' '*' unary | atom
    atom    ::= INT | IDENT | 'new' '(' expr ')' | 'free' '(' expr ')'
              | '(' expr ')'

``//`` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int
    offset: int = 0
    end_line: int = 0

    @property
    def last_line(self) -> int:
        return max(self.line, self.end_line)

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


def _span_field():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class IntLit:
    value: int
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Var:
    name: str
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class New:
    init: "Expr"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Free:
    target: "Expr"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Read:
    target: "Expr"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Write:
    target: "Expr"
    value: "Expr"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class MutBorrow:
    target: "Expr"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class ShrBorrow:
    target: "Expr"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Let:
    name: str
    bound: "Expr"
    body: "Expr"
    span: SourceSpan | None = _span_field()


@dataclass(frozen=True)
class Seq:
    first: "Expr"
    second: "Expr"
    span: SourceSpan | None = _span_field()


Expr = Union[IntLit, Var, New, Free, Read, Write, MutBorrow, ShrBorrow, Let, Seq]


class ParseError(Exception):
    def __init__(self, message: str, span: SourceSpan, expected: frozenset[str] = frozenset()):
        self.message = message
        self.span = span
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{span}: {message}{detail}")


class ScopeError(Exception):
    def __init__(self, name: str, span: SourceSpan | None):
        self.name = name
        self.span = span
        where = f"{span}: " if span is not None else ""
        super().__init__(f"{where}unbound variable {name!r}")


# --- lexer ---------------------------------------------------------------

KEYWORDS = {"let", "in", "new", "free", "mut"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<int>-?[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|[=;*&()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "int", "ident", a keyword, an operator, or "eof"
    text: str
    offset: int
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            span = SourceSpan(line, pos - line_start + 1, 1, pos)
            raise ParseError(f"unexpected character {text[pos]!r}", span)
        kind = m.lastgroup
        lexeme = m.group()
        if kind == "ident" and lexeme in KEYWORDS:
            kind = lexeme
        elif kind == "op":
            kind = lexeme
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, lexeme, pos, line, pos - line_start + 1))
        newlines = lexeme.count("\n")
        if newlines:
            line += newlines
            line_start = pos + lexeme.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", pos, line, pos - line_start + 1))
    return tokens


# --- parser --------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, *kinds: str) -> Token:
        tok = self.peek()
        if tok.kind not in kinds:
            self.fail(tok, f"unexpected {_describe(tok)}", set(kinds))
        return self.advance()

    def fail(self, tok: Token, message: str, expected: set[str]):
        span = SourceSpan(tok.line, tok.column, max(len(tok.text), 1), tok.offset)
        raise ParseError(message, span, frozenset(expected))

    def span_from(self, start: Token) -> SourceSpan:
        last = self.tokens[self.pos - 1]
        end = last.offset + len(last.text)
        return SourceSpan(start.line, start.column, end - start.offset, start.offset, last.line)

    def parse_program(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "eof":
            self.fail(tok, f"unexpected {_describe(tok)}", {";", ":=", "eof"})
        return e

    def expr(self) -> Expr:
        start = self.peek()
        if start.kind == "let":
            self.advance()
            name = self.expect("ident").text
            self.expect(":=", "=")
            bound = self.expr()
            self.expect("in")
            body = self.expr()
            return Let(name, bound, body, span=self.span_from(start))
        first = self.assign()
        if self.peek().kind == ";":
            self.advance()
            second = self.expr()
            return Seq(first, second, span=self.span_from(start))
        return first

    def assign(self) -> Expr:
        start = self.peek()
        lhs = self.unary()
        if self.peek().kind != ":=":
            return lhs
        if not isinstance(lhs, Read):
            self.fail(self.peek(), "assignment target must be a dereference `*e`", set())
        self.advance()
        rhs = self.assign()
        return Write(lhs.target, rhs, span=self.span_from(start))

    def unary(self) -> Expr:
        start = self.peek()
        if start.kind == "*":
            self.advance()
            return Read(self.unary(), span=self.span_from(start))
        if start.kind == "&":
            self.advance()
            if self.peek().kind == "mut":
                self.advance()
                self.expect("*")
                return MutBorrow(self.unary(), span=self.span_from(start))
            self.expect("*", "mut")
            return ShrBorrow(self.unary(), span=self.span_from(start))
        return self.atom()

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return IntLit(int(tok.text), span=self.span_from(tok))
        if tok.kind == "ident":
            self.advance()
            return Var(tok.text, span=self.span_from(tok))
        if tok.kind in ("new", "free"):
            self.advance()
            self.expect("(")
            inner = self.expr()
            self.expect(")")
            node = New if tok.kind == "new" else Free
            return node(inner, span=self.span_from(tok))
        if tok.kind == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return inner
        self.fail(tok, f"unexpected {_describe(tok)}",
                  {"int", "ident", "new", "free", "(", "*", "&", "let"})


def _describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else f"token {tok.text!r}"


def parse(text: str) -> Expr:
    """Parse λ_PA source text; every node carries its SourceSpan."""
    return _Parser(text).parse_program()


# --- pretty-printer ------------------------------------------------------

# precedence levels: 0 = expr (let/seq allowed), 1 = assign, 2 = unary
def _level(e: Expr) -> int:
    if isinstance(e, (Let, Seq)):
        return 0
    if isinstance(e, Write):
        return 1
    return 2


def _pp(e: Expr, ctx: int) -> str:
    text = _render(e)
    return f"({text})" if _level(e) < ctx else text


def _render(e: Expr) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, New):
        return f"new({_pp(e.init, 0)})"
    if isinstance(e, Free):
        return f"free({_pp(e.target, 0)})"
    if isinstance(e, Read):
        return f"*{_pp(e.target, 2)}"
    if isinstance(e, Write):
        return f"*{_pp(e.target, 2)} := {_pp(e.value, 1)}"
    if isinstance(e, MutBorrow):
        return f"&mut *{_pp(e.target, 2)}"
    if isinstance(e, ShrBorrow):
        return f"&*{_pp(e.target, 2)}"
    if isinstance(e, Let):
        return f"let {e.name} := {_pp(e.bound, 0)} in {_pp(e.body, 0)}"
    if isinstance(e, Seq):
        return f"{_pp(e.first, 1)}; {_pp(e.second, 0)}"
    raise TypeError(f"not an expression: {e!r}")


def pretty(e: Expr) -> str:
    """Canonical single-line rendering; ``parse(pretty(e)) == e``."""
    return _render(e)


# --- scope checking ------------------------------------------------------


def children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, (IntLit, Var)):
        return ()
    if isinstance(e, (New,)):
        return (e.init,)
    if isinstance(e, (Free, Read, MutBorrow, ShrBorrow)):
        return (e.target,)
    if isinstance(e, Write):
        return (e.target, e.value)
    if isinstance(e, Let):
        return (e.bound, e.body)
    if isinstance(e, Seq):
        return (e.first, e.second)
    raise TypeError(f"not an expression: {e!r}")


def walk(e: Expr) -> Iterator[Expr]:
    yield e
    for c in children(e):
        yield from walk(c)


def check_scopes(e: Expr, bound: frozenset[str] = frozenset()) -> None:
    """Raise ScopeError for the first variable not bound by an enclosing let."""
    # explicit stack: generated programs nest deeper than the recursion limit likes
    stack: list[tuple[Expr, frozenset[str]]] = [(e, bound)]
    while stack:
        node, scope = stack.pop()
        if isinstance(node, Var):
            if node.name not in scope:
                raise ScopeError(node.name, node.span)
        elif isinstance(node, Let):
            stack.append((node.body, scope | {node.name}))
            stack.append((node.bound, scope))
        else:
            stack.extend((c, scope) for c in reversed(children(node)))


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Let):
        return free_vars(e.bound) | (free_vars(e.body) - {e.name})
    out: set[str] = set()
    for c in children(e):
        out |= free_vars(c)
    return out
