"""Recursive-descent parser for the expression language.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := number | identifier | "ln" "(" expr ")" | "(" expr ")"

``^`` is right-associative through ``factor``.  Integer literals are exact;
literals with a decimal point or exponent are floats.  The typographic minus
``−`` is accepted as ``-``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .nodes import Add, Const, Div, Expr, Ln, Mul, Neg, Pow, Sub, Var, as_exact

FUNCTIONS = frozenset({"ln"})

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()−])
    """,
    re.VERBOSE,
)


class ParseError(ValueError):
    """Syntax error carrying the UTF-8 byte offset and the expected tokens."""

    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at byte {offset}{detail}")


class UnknownFunctionError(ParseError):
    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"unknown function {name!r}", offset, FUNCTIONS)


@dataclass(frozen=True)
class Token:
    kind: str  # "number", "ident", "op", "end"
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    byte = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", byte,
                             {"number", "identifier", "(", "-"})
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            if chunk == "−":
                chunk = "-"
            tokens.append(Token(kind, chunk, byte))
        byte += len(m.group().encode("utf-8"))
        pos = m.end()
    tokens.append(Token("end", "", byte))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str):
        if self.tok.kind != "op" or self.tok.text != text:
            self.fail({repr(text)})
        return self.advance()

    def fail(self, expected):
        t = self.tok
        what = "end of input" if t.kind == "end" else repr(t.text)
        raise ParseError(f"unexpected {what}", t.offset, expected)

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail({"'+'", "'-'", "'*'", "'/'", "'^'", "end of input"})
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            rhs = self.factor()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def factor(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            start = self.tok.offset
            exponent = self.factor()
            value = _fold_constant(exponent)
            if value is None:
                raise ParseError("exponent must be a constant rational", start)
            return Pow(base, value)
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            if any(c in t.text for c in ".eE"):
                return Const(float(t.text))
            return Const(Fraction(int(t.text)))
        if t.kind == "ident":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                if t.text not in FUNCTIONS:
                    raise UnknownFunctionError(t.text, t.offset)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Ln(arg)
            if t.text in FUNCTIONS:
                self.fail({"'('"})
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        self.fail({"number", "identifier", "'('", "'-'", "'ln'"})


def _fold_constant(node: Expr) -> Fraction | None:
    """Exact value of a variable-free, ln-free subtree, else None."""
    if isinstance(node, Const):
        return as_exact(node.value)
    if isinstance(node, Neg):
        v = _fold_constant(node.arg)
        return None if v is None else -v
    if isinstance(node, (Add, Sub, Mul, Div)):
        lv, rv = _fold_constant(node.left), _fold_constant(node.right)
        if lv is None or rv is None:
            return None
        if isinstance(node, Add):
            return lv + rv
        if isinstance(node, Sub):
            return lv - rv
        if isinstance(node, Mul):
            return lv * rv
        return None if rv == 0 else lv / rv
    if isinstance(node, Pow):
        v = _fold_constant(node.base)
        if v is None or node.exponent.denominator != 1 or (v == 0 and node.exponent < 0):
            return None
        return v ** int(node.exponent)
    return None


def parse(text: str) -> Expr:
    """Parse *text* into a raw (unsimplified) expression tree."""
    return _Parser(text).parse()
