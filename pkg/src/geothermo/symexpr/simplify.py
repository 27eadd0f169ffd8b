"""Best-effort simplification.

Two stages:

1. A rule-based canonicalizer: constants fold, ``0``/``1`` identities
   vanish, like terms and like factors are collected (so ``x*x^-1`` cancels),
   and sums used as factors are normalized (leading coefficient 1) so that
   ``(b - V)`` and ``(V - b)`` are recognized as the same base.
2. For ln-free, float-free results: normalization as a single reduced
   rational function over a common denominator.

The output is not a canonical form.  Correctness means numeric equality.
"""
from __future__ import annotations

from fractions import Fraction

from .nodes import (Add, Const, Div, Expr, Ln, Mul, Neg, Pow, Sub, Var, balanced,
                    is_rational_function, size)

DEFAULT_BUDGET = 20000

# canonical sum: {monomial: coefficient}; a monomial is a sorted tuple of (base, exponent)


def _sort_key(item) -> tuple:
    base, exp = item
    return (str(base), exp)


def _mono_key(mono) -> tuple:
    degree = -sum(e for _, e in mono)
    return (mono == (), degree, tuple((str(b), e) for b, e in mono))


def _add_into(acc: dict, mono, coeff):
    c = acc.get(mono, 0) + coeff
    if c == 0:
        acc.pop(mono, None)
    else:
        acc[mono] = c


def _mono_mul(m1, m2):
    exps: dict[Expr, Fraction] = dict(m1)
    for base, e in m2:
        exps[base] = exps.get(base, 0) + e
    return tuple(sorted(((b, e) for b, e in exps.items() if e != 0), key=_sort_key))


def _is_exact(c) -> bool:
    return isinstance(c, Fraction)


class _Canon:
    def __init__(self):
        self.memo: dict[Expr, dict] = {}

    def __call__(self, node: Expr) -> dict:
        try:
            return self.memo[node]
        except KeyError:
            pass
        out = self._compute(node)
        self.memo[node] = out
        return out

    def _compute(self, node):
        if isinstance(node, Const):
            return {(): node.value} if node.value != 0 else {}
        if isinstance(node, Var):
            return {((node, Fraction(1)),): Fraction(1)}
        if isinstance(node, (Add, Sub)):
            acc = dict(self(node.left))
            sign = 1 if isinstance(node, Add) else -1
            for mono, c in self(node.right).items():
                _add_into(acc, mono, sign * c)
            return acc
        if isinstance(node, Neg):
            return {m: -c for m, c in self(node.arg).items()}
        if isinstance(node, Mul):
            return self._mul(self(node.left), self(node.right))
        if isinstance(node, Div):
            return self._mul(self(node.left), self._pow(self(node.right), Fraction(-1)))
        if isinstance(node, Pow):
            return self._pow(self(node.base), node.exponent)
        if isinstance(node, Ln):
            arg = rebuild_sum(self(node.arg))
            if arg == Const(1):
                return {}
            return {((Ln(arg), Fraction(1)),): Fraction(1)}
        raise TypeError(type(node))  # pragma: no cover

    def _as_single(self, form):
        """(coefficient, monomial) view of *form*, turning sums into bases."""
        if not form:
            return 0, ()
        if len(form) == 1:
            (mono, c), = form.items()
            return c, mono
        items = sorted(form.items(), key=lambda kv: _mono_key(kv[0]))
        lead = items[0][1]
        if all(_is_exact(c) for _, c in items):
            scaled = {m: c / lead for m, c in items}
        else:
            lead = 1
            scaled = dict(items)
        return lead, ((rebuild_sum(scaled), Fraction(1)),)

    def _mul(self, f1, f2):
        if not f1 or not f2:
            return {}
        # scalars distribute over sums
        if len(f1) == 1 and () in f1:
            return {m: f1[()] * c for m, c in f2.items()}
        if len(f2) == 1 and () in f2:
            return {m: f2[()] * c for m, c in f1.items()}
        c1, m1 = self._as_single(f1)
        c2, m2 = self._as_single(f2)
        return self._settle(c1 * c2, _mono_mul(m1, m2))

    def _settle(self, coeff, mono):
        """Fold integer powers of constants; a lone sum to the first power
        dissolves back into its terms."""
        if any(isinstance(b, (Const, Add, Sub)) and e.denominator == 1 for b, e in mono):
            kept = ()
            for b, e in mono:
                if e.denominator != 1:
                    kept = _mono_mul(kept, ((b, e),))
                elif isinstance(b, Const):
                    coeff = coeff * b.value ** int(e)
                elif isinstance(b, (Add, Sub)):
                    # sums merged from fractional powers may not be normalized yet
                    lead, norm = self._as_single(self(b))
                    coeff = coeff * lead ** int(e)
                    kept = _mono_mul(kept, tuple((nb, ne * e) for nb, ne in norm))
                else:
                    kept = _mono_mul(kept, ((b, e),))
            mono = kept
        if len(mono) == 1 and mono[0][1] == 1 and isinstance(mono[0][0], (Add, Sub)):
            return {m: coeff * c for m, c in self(mono[0][0]).items()}
        return {mono: coeff}

    def _pow(self, form, n: Fraction):
        if n == 0:
            return {(): Fraction(1)}
        if n == 1:
            return form
        if not form:
            if n > 0:
                return {}
            # symbolic division by zero stays visible
            return {((Pow(Const(0), n), Fraction(1)),): Fraction(1)}
        c, mono = self._as_single(form)
        if n.denominator == 1:
            coeff = c ** int(n)
            return self._settle(coeff, tuple(sorted(((b, e * n) for b, e in mono), key=_sort_key)))
        # fractional powers only merge the trivial x^1 case
        if c == 1 and len(mono) == 1 and mono[0][1] == 1:
            return {((mono[0][0], n),): Fraction(1)}
        if mono == () and _is_exact(c) and c > 0:
            root = _exact_root(c, n)
            if root is not None:
                return {(): root}
        base = Const(c) if mono == () else rebuild_sum(form)
        return {((base, n),): Fraction(1)}


def _exact_root(c: Fraction, n: Fraction) -> Fraction | None:
    p, q = n.numerator, n.denominator
    num = _int_root(c.numerator, q)
    den = _int_root(c.denominator, q)
    if num is None or den is None:
        return None
    return Fraction(num, den) ** p


def _int_root(x: int, q: int) -> int | None:
    r = round(x ** (1.0 / q))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** q == x:
            return cand
    return None


def _factor_expr(base: Expr, e: Fraction) -> Expr:
    return base if e == 1 else Pow(base, e)


def _product(factors: list[Expr]) -> Expr:
    return balanced(Mul, factors)


def _term(coeff, mono) -> tuple[Expr, bool]:
    """Unsigned term expression and whether its coefficient is negative."""
    negative = coeff < 0
    mag = -coeff if negative else coeff
    num = [_factor_expr(b, e) for b, e in mono if e > 0]
    den = [_factor_expr(b, -e) for b, e in mono if e < 0]
    if _is_exact(mag):
        p, q = mag.numerator, mag.denominator
        if p != 1 or not num:
            num.insert(0, Const(Fraction(p)))
        if q != 1:
            den.insert(0, Const(Fraction(q)))
    else:
        if mag != 1.0 or not num:
            num.insert(0, Const(mag))
    expr = _product(num)
    if den:
        expr = Div(expr, _product(den))
    return expr, negative


def rebuild_sum(form: dict) -> Expr:
    """Tree for a canonical sum, terms in a deterministic order."""
    if not form:
        return Const(0)
    items = sorted(form.items(), key=lambda kv: _mono_key(kv[0]))
    terms = [_term(c, m) for m, c in items]
    if len(terms) > 32:
        # balanced folding keeps very long sums shallow
        signed = [Neg(t) if neg else t for t, neg in terms]
        return balanced(Add, signed)
    expr, neg = terms[0]
    acc = Neg(expr) if neg else expr
    for t, neg in terms[1:]:
        acc = Sub(acc, t) if neg else Add(acc, t)
    return acc


def canonicalize(expr: Expr) -> Expr:
    """Rule-based stage only."""
    return rebuild_sum(_Canon()(expr))


def rational_normal_form(expr: Expr) -> Expr:
    """Single reduced ``numer/denom``; *expr* must be a rational function."""
    from .rational import from_fraction, to_fraction

    elem, names = to_fraction(expr)
    return from_fraction(elem, names)


def simplify(expr: Expr, rational: bool = True, budget: int = DEFAULT_BUDGET) -> Expr:
    """Algebraically equal, usually smaller, expression.

    Results larger than *budget* nodes are discarded in favor of the previous
    stage (ultimately the input itself).
    """
    out = canonicalize(expr)
    if size(out) > budget:
        out = expr
    if rational and is_rational_function(out):
        try:
            normal = rational_normal_form(out)
        except ZeroDivisionError:
            return out
        if size(normal) <= budget:
            return normal
    return out
