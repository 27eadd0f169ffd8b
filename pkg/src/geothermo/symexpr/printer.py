"""Text rendering that the parser reads back to the same tree."""
from __future__ import annotations

from fractions import Fraction

from .nodes import Const, Expr, Ln, Neg, Pow, Var, _Binary


def _const_text(value) -> tuple[str, int]:
    if isinstance(value, Fraction):
        if value.denominator == 1 and value >= 0:
            return str(value.numerator), 5
        return f"({value})", 5
    text = repr(value)
    if value < 0 or text.startswith("-"):
        return f"({text})", 5
    return text, 5


def _exponent_text(e: Fraction) -> str:
    if e.denominator == 1:
        return str(e.numerator)
    return f"({e})"


def to_text(expr: Expr) -> str:
    """Render *expr* with the minimal parentheses the grammar needs.

    Right operands of ``+ - * /`` at equal precedence are parenthesized so
    the left-associative parser rebuilds the identical tree.
    """
    memo: dict[Expr, tuple[str, int]] = {}

    def go(node) -> tuple[str, int]:
        if node in memo:
            return memo[node]
        if isinstance(node, Const):
            out = _const_text(node.value)
        elif isinstance(node, Var):
            out = (node.name, 5)
        elif isinstance(node, Ln):
            out = (f"ln({go(node.arg)[0]})", 5)
        elif isinstance(node, Neg):
            text, prec = go(node.arg)
            if prec < 3 or isinstance(node.arg, Neg):
                text = f"({text})"
            out = (f"-{text}", 3)
        elif isinstance(node, Pow):
            text, prec = go(node.base)
            if prec < 5:
                text = f"({text})"
            out = (f"{text}^{_exponent_text(node.exponent)}", 4)
        elif isinstance(node, _Binary):
            p = node.precedence
            lt, lp = go(node.left)
            rt, rp = go(node.right)
            if lp < p:
                lt = f"({lt})"
            # a negation on the right reads better bracketed; the parse is identical
            if rp <= p or isinstance(node.right, Neg):
                rt = f"({rt})"
            sep = f" {node.symbol} " if p == 1 else node.symbol
            out = (f"{lt}{sep}{rt}", p)
        else:  # pragma: no cover
            raise TypeError(type(node))
        memo[node] = out
        return out

    return go(expr)[0]

