"""Exact symbolic partial differentiation."""
from __future__ import annotations

from fractions import Fraction

from .nodes import Add, Const, Div, Expr, Ln, Mul, Neg, Pow, Sub, Var, ZERO
from .simplify import DEFAULT_BUDGET, simplify


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return Add(a, b)


def _sub(a, b):
    if _is_zero(b):
        return a
    if _is_zero(a):
        return Neg(b)
    return Sub(a, b)


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return ZERO
    if a == Const(1):
        return b
    if b == Const(1):
        return a
    return Mul(a, b)


def derivative(expr: Expr, var: str) -> Expr:
    """Raw derivative tree; zero branches are pruned but nothing is collected."""
    memo: dict[Expr, Expr] = {}

    def d(node: Expr) -> Expr:
        if node in memo:
            return memo[node]
        if isinstance(node, Const):
            out = ZERO
        elif isinstance(node, Var):
            out = Const(1) if node.name == var else ZERO
        elif isinstance(node, Add):
            out = _add(d(node.left), d(node.right))
        elif isinstance(node, Sub):
            out = _sub(d(node.left), d(node.right))
        elif isinstance(node, Neg):
            da = d(node.arg)
            out = ZERO if _is_zero(da) else Neg(da)
        elif isinstance(node, Mul):
            out = _add(_mul(d(node.left), node.right), _mul(node.left, d(node.right)))
        elif isinstance(node, Div):
            dl, dr = d(node.left), d(node.right)
            first = ZERO if _is_zero(dl) else Div(dl, node.right)
            second = ZERO if _is_zero(dr) else Div(_mul(node.left, dr), Pow(node.right, 2))
            out = _sub(first, second)
        elif isinstance(node, Pow):
            db = d(node.base)
            n = node.exponent
            if _is_zero(db):
                out = ZERO
            else:
                inner = Const(1) if n == 1 else (node.base if n == 2 else Pow(node.base, n - 1))
                out = _mul(_mul(Const(n), inner), db)
        elif isinstance(node, Ln):
            da = d(node.arg)
            out = ZERO if _is_zero(da) else Div(da, node.arg)
        else:  # pragma: no cover
            raise TypeError(type(node))
        memo[node] = out
        return out

    return d(expr)


def differentiate(expr: Expr, var: str, simplified: bool = True,
                  budget: int = DEFAULT_BUDGET) -> Expr:
    """Partial derivative of *expr* with respect to the variable *var*.

    A variable absent from *expr* gives the zero constant.
    """
    raw = derivative(expr, var)
    return simplify(raw, budget=budget) if simplified else raw
