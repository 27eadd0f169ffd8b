"""Bridge between expression trees and exact multivariate rational functions.

Rational functions live in a ``sympy.polys`` fraction field over QQ, which
cancels common factors on every operation.  Only ln-free, float-free
expressions with integer powers convert.
"""
from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Iterable

from sympy import QQ
from sympy.polys.fields import field

from .nodes import (Add, Const, Div, Expr, Ln, Mul, Neg, Pow, Sub, Var, free_variables,
                    is_rational_function)


class NotRational(ValueError):
    pass


@lru_cache(maxsize=64)
def fraction_field(names: tuple[str, ...]):
    """``(K, gens)`` for QQ(names); cached so elements of one field combine."""
    if not names:
        names = ("_",)
    K, *gens = field(",".join(names), QQ)
    return K, dict(zip(names, gens))


def _qq(value: Fraction):
    return QQ(value.numerator, value.denominator)


def to_fraction(expr: Expr, names: Iterable[str] | None = None):
    """Convert *expr* into an element of the fraction field over *names*.

    Raises :class:`NotRational` for ln, floats or fractional powers, and
    ``ZeroDivisionError`` for a symbolically vanishing divisor.
    """
    if not is_rational_function(expr):
        raise NotRational(str(expr))
    names = tuple(sorted(free_variables(expr) if names is None else names))
    K, gens = fraction_field(names)
    memo: dict[Expr, object] = {}

    def go(node):
        if node in memo:
            return memo[node]
        if isinstance(node, Const):
            out = K(_qq(node.value))
        elif isinstance(node, Var):
            out = gens[node.name]
        elif isinstance(node, Add):
            out = go(node.left) + go(node.right)
        elif isinstance(node, Sub):
            out = go(node.left) - go(node.right)
        elif isinstance(node, Mul):
            out = go(node.left) * go(node.right)
        elif isinstance(node, Div):
            den = go(node.right)
            if not den:
                raise ZeroDivisionError(f"{node.right} is identically zero")
            out = go(node.left) / den
        elif isinstance(node, Neg):
            out = -go(node.arg)
        elif isinstance(node, Pow):
            base = go(node.base)
            n = int(node.exponent)
            if n < 0 and not base:
                raise ZeroDivisionError(f"{node.base} is identically zero")
            out = base ** n
        elif isinstance(node, Ln):  # pragma: no cover - excluded above
            raise NotRational(str(node))
        else:  # pragma: no cover
            raise TypeError(type(node))
        memo[node] = out
        return out

    return go(expr), names


def poly_terms(poly, names: tuple[str, ...]) -> dict:
    """``{((name, power), ...): Fraction}`` view of a sympy PolyElement."""
    out = {}
    for monom, coeff in poly.terms():
        key = tuple((n, k) for n, k in zip(names, monom) if k)
        out[key] = Fraction(int(coeff.numerator), int(coeff.denominator))
    return out


def from_polynomial(poly, names: tuple[str, ...]) -> Expr:
    from .simplify import rebuild_sum

    terms = {}
    for key, coeff in poly_terms(poly, names).items():
        mono = tuple((Var(n), Fraction(k)) for n, k in key)
        terms[mono] = coeff
    return rebuild_sum(terms)


def from_fraction(elem, names: tuple[str, ...]) -> Expr:
    """Convert a fraction-field element back to a tree ``numer / denom``."""
    if names == ():
        names = ("_",)
    num = from_polynomial(elem.numer, names)
    if elem.denom == 1:
        return num
    den = from_polynomial(elem.denom, names)
    if isinstance(num, Neg):
        return Neg(Div(num.arg, den))
    return Div(num, den)
