"""Immutable expression-tree nodes.

Nodes are hashable values.  Structural equality is exact: ``Const(1)`` (an
exact rational) and ``Const(1.0)`` (a float literal) are different nodes.
Operator overloads build raw, unsimplified trees; call
:func:`geothermo.symexpr.simplify` to normalize.
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational, Real
from typing import Iterable, Iterator

Number = Fraction | float


def as_exact(value) -> Fraction:
    """Exact rational for a literal.

    Floats are read through their shortest decimal repr, so ``0.05`` becomes
    ``1/20`` rather than the binary expansion of the double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, Real):
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value!r}")
        return Fraction(repr(float(value)))
    raise TypeError(f"not a real number: {value!r}")


def _normalize_number(value) -> Number:
    if isinstance(value, bool):
        return Fraction(int(value))
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(int(value.numerator), int(value.denominator))
    if isinstance(value, Real):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value!r}")
        return value
    raise TypeError(f"not a real number: {value!r}")


class Expr:
    """Base class of all expression nodes."""

    __slots__ = ("_hash", "_text")

    # printing precedence: sums 1, products 2, negation 3, powers 4, atoms 5
    precedence = 5

    def _key(self) -> tuple:
        raise NotImplementedError

    @property
    def children(self) -> tuple[Expr, ...]:
        return ()

    def rebuild(self, children: tuple[Expr, ...]) -> Expr:
        return self

    def __hash__(self) -> int:
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + self._key())
            object.__setattr__(self, "_hash", h)
            return h

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or hash(self) != hash(other):
            return False
        return self._key() == other._key()

    def __ne__(self, other) -> bool:
        return not self == other

    def __setattr__(self, name, value):
        raise AttributeError("expressions are immutable")

    def __str__(self) -> str:
        try:
            return self._text
        except AttributeError:
            from .printer import to_text

            text = to_text(self)
            object.__setattr__(self, "_text", text)
            return text

    def __repr__(self) -> str:
        return f"Expr({str(self)!r})"

    # arithmetic builds raw trees
    def __add__(self, other):
        return Add(self, lift(other))

    def __radd__(self, other):
        return Add(lift(other), self)

    def __sub__(self, other):
        return Sub(self, lift(other))

    def __rsub__(self, other):
        return Sub(lift(other), self)

    def __mul__(self, other):
        return Mul(self, lift(other))

    def __rmul__(self, other):
        return Mul(lift(other), self)

    def __truediv__(self, other):
        return Div(self, lift(other))

    def __rtruediv__(self, other):
        return Div(lift(other), self)

    def __pow__(self, exponent):
        return Pow(self, exponent)

    def __neg__(self):
        return Neg(self)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        object.__setattr__(self, "value", _normalize_number(value))

    def _key(self):
        return (type(self.value).__name__, self.value)

    @property
    def exact(self) -> bool:
        return isinstance(self.value, Fraction)


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        if not isinstance(name, str) or not name:
            raise ValueError("variable name must be a nonempty string")
        object.__setattr__(self, "name", name)

    def _key(self):
        return (self.name,)


class _Binary(Expr):
    __slots__ = ("left", "right")
    symbol = "?"

    def __init__(self, left: Expr, right: Expr):
        object.__setattr__(self, "left", lift(left))
        object.__setattr__(self, "right", lift(right))

    def _key(self):
        return (self.left, self.right)

    @property
    def children(self):
        return (self.left, self.right)

    def rebuild(self, children):
        return type(self)(*children)


class Add(_Binary):
    __slots__ = ()
    precedence = 1
    symbol = "+"


class Sub(_Binary):
    __slots__ = ()
    precedence = 1
    symbol = "-"


class Mul(_Binary):
    __slots__ = ()
    precedence = 2
    symbol = "*"


class Div(_Binary):
    __slots__ = ()
    precedence = 2
    symbol = "/"


class Pow(Expr):
    """``base ^ exponent`` with a constant rational exponent."""

    __slots__ = ("base", "exponent")
    precedence = 4

    def __init__(self, base: Expr, exponent):
        if isinstance(exponent, Const):
            exponent = exponent.value
        if isinstance(exponent, Expr):
            raise TypeError("power exponents must be constant rationals")
        object.__setattr__(self, "base", lift(base))
        object.__setattr__(self, "exponent", as_exact(exponent))

    def _key(self):
        return (self.base, self.exponent)

    @property
    def children(self):
        return (self.base,)

    def rebuild(self, children):
        return Pow(children[0], self.exponent)


class Neg(Expr):
    __slots__ = ("arg",)
    precedence = 3

    def __init__(self, arg: Expr):
        object.__setattr__(self, "arg", lift(arg))

    def _key(self):
        return (self.arg,)

    @property
    def children(self):
        return (self.arg,)

    def rebuild(self, children):
        return Neg(children[0])


class Ln(Expr):
    __slots__ = ("arg",)

    def __init__(self, arg: Expr):
        object.__setattr__(self, "arg", lift(arg))

    def _key(self):
        return (self.arg,)

    @property
    def children(self):
        return (self.arg,)

    def rebuild(self, children):
        return Ln(children[0])


ZERO = Const(0)
ONE = Const(1)


def lift(value) -> Expr:
    """Coerce numbers (and variable names) to nodes."""
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return Var(value)
    return Const(value)


def ln(arg) -> Ln:
    return Ln(lift(arg))


def symbols(names: str | Iterable[str]) -> tuple[Var, ...]:
    if isinstance(names, str):
        names = names.replace(",", " ").split()
    return tuple(Var(n) for n in names)


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order traversal visiting each distinct node once."""
    seen = set()
    stack = [expr]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        yield node
        stack.extend(reversed(node.children))


def free_variables(expr: Expr) -> frozenset[str]:
    return frozenset(n.name for n in walk(expr) if isinstance(n, Var))


def size(expr: Expr) -> int:
    """Number of nodes counted as a tree (shared subtrees count repeatedly)."""
    memo: dict[Expr, int] = {}

    def count(node):
        if node in memo:
            return memo[node]
        n = 1 + sum(count(c) for c in node.children)
        memo[node] = n
        return n

    return count(expr)


def has_log(expr: Expr) -> bool:
    return any(isinstance(n, Ln) for n in walk(expr))


def is_rational_function(expr: Expr) -> bool:
    """True if *expr* is ln-free, float-free and uses only integer powers."""
    for node in walk(expr):
        if isinstance(node, Ln):
            return False
        if isinstance(node, Const) and not node.exact:
            return False
        if isinstance(node, Pow) and node.exponent.denominator != 1:
            return False
    return True


def substitute(expr: Expr, mapping) -> Expr:
    """Replace variables by expressions or numbers (simultaneously)."""
    repl = {k: lift(v) for k, v in mapping.items()}
    if not repl:
        return expr
    memo: dict[Expr, Expr] = {}

    def go(node):
        if node in memo:
            return memo[node]
        if isinstance(node, Var):
            out = repl.get(node.name, node)
        elif node.children:
            kids = tuple(go(c) for c in node.children)
            out = node if kids == node.children else node.rebuild(kids)
        else:
            out = node
        memo[node] = out
        return out

    return go(expr)


def balanced(op, items: list[Expr]) -> Expr:
    """Fold *items* with a binary node class, left-associated for short lists.

    Long chains are folded as a balanced tree so recursive passes stay shallow.
    """
    if not items:
        raise ValueError("empty fold")
    if len(items) <= 32:
        acc = items[0]
        for item in items[1:]:
            acc = op(acc, item)
        return acc
    mid = len(items) // 2
    return op(balanced(op, items[:mid]), balanced(op, items[mid:]))
