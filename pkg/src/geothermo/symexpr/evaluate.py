"""Numeric evaluation: a checked tree walker and a compiled fast path."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from .nodes import Add, Const, Div, Expr, Ln, Mul, Neg, Pow, Sub, Var, free_variables


class EvaluationError(ArithmeticError):
    pass


class UnboundVariableError(EvaluationError, KeyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"unbound variable {name!r}")

    def __str__(self):
        return self.args[0]


class DomainError(EvaluationError, ValueError):
    """Evaluation left the real domain (ln of non-positive, division by zero, ...)."""

    def __init__(self, message: str, subexpression: Expr | None = None, value: float | None = None):
        self.subexpression = subexpression
        self.value = value
        super().__init__(message)


def _power(base: float, exponent: Fraction, node: Expr) -> float:
    if exponent.denominator == 1:
        n = int(exponent)
        if base == 0.0 and n < 0:
            raise DomainError(f"division by zero in {node}", node, base)
        return base ** n
    if base < 0.0:
        raise DomainError(f"fractional power of negative base in {node}", node, base)
    if base == 0.0 and exponent < 0:
        raise DomainError(f"division by zero in {node}", node, base)
    return base ** float(exponent)


def evaluate(expr: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate *expr* in double precision.

    Raises
    ------
    UnboundVariableError
        A variable of *expr* has no binding.
    DomainError
        ``ln`` of a non-positive argument, a zero divisor, or a fractional
        power of a negative number; carries the offending subexpression and
        its value.
    """
    memo: dict[Expr, float] = {}

    def go(node: Expr) -> float:
        try:
            return memo[node]
        except KeyError:
            pass
        if isinstance(node, Const):
            out = float(node.value)
        elif isinstance(node, Var):
            try:
                out = float(bindings[node.name])
            except KeyError:
                raise UnboundVariableError(node.name) from None
        elif isinstance(node, Add):
            out = go(node.left) + go(node.right)
        elif isinstance(node, Sub):
            out = go(node.left) - go(node.right)
        elif isinstance(node, Mul):
            out = go(node.left) * go(node.right)
        elif isinstance(node, Div):
            num, den = go(node.left), go(node.right)
            if den == 0.0:
                raise DomainError(f"division by zero: {node.right} = 0", node.right, den)
            out = num / den
        elif isinstance(node, Neg):
            out = -go(node.arg)
        elif isinstance(node, Pow):
            out = _power(go(node.base), node.exponent, node)
        elif isinstance(node, Ln):
            x = go(node.arg)
            if not x > 0.0:
                raise DomainError(f"ln of non-positive argument: {node.arg} = {x!r}", node.arg, x)
            out = math.log(x)
        else:  # pragma: no cover
            raise TypeError(type(node))
        memo[node] = out
        return out

    return go(expr)


def _literal(value) -> str:
    x = float(value)
    # parenthesized so that e.g. (-1.0) ** 2 keeps its sign convention
    return f"({x!r})" if x < 0 or math.copysign(1.0, x) < 0 else repr(x)


def compile_expressions(exprs: Sequence[Expr], args: Sequence[str],
                        name: str = "compiled") -> Callable[..., tuple]:
    """Generate a straight-line Python function evaluating all *exprs*.

    Shared subtrees (within and across expressions) are computed once.  The
    returned function takes positional floats ordered as *args* and returns a
    tuple of floats.  Arithmetic faults surface as :class:`DomainError`; the
    checked walker is re-run to name the offending subexpression.
    """
    missing = set().union(*(free_variables(e) for e in exprs)) - set(args) if exprs else set()
    if missing:
        raise UnboundVariableError(sorted(missing)[0])
    lines: list[str] = []
    names: dict[Expr, str] = {}
    argnames = {a: f"a{i}" for i, a in enumerate(args)}

    def emit(node: Expr) -> str:
        if node in names:
            return names[node]
        if isinstance(node, Const):
            return _literal(node.value)
        if isinstance(node, Var):
            return argnames[node.name]
        # iterative post-order keeps deep trees off the Python stack
        stack = [(node, False)]
        while stack:
            cur, ready = stack.pop()
            if cur in names or isinstance(cur, (Const, Var)):
                continue
            if not ready:
                stack.append((cur, True))
                stack.extend((c, False) for c in cur.children)
                continue
            ref = lambda c: _literal(c.value) if isinstance(c, Const) else (
                argnames[c.name] if isinstance(c, Var) else names[c])
            if isinstance(cur, Add):
                code = f"{ref(cur.left)} + {ref(cur.right)}"
            elif isinstance(cur, Sub):
                code = f"{ref(cur.left)} - {ref(cur.right)}"
            elif isinstance(cur, Mul):
                code = f"{ref(cur.left)} * {ref(cur.right)}"
            elif isinstance(cur, Div):
                code = f"{ref(cur.left)} / {ref(cur.right)}"
            elif isinstance(cur, Neg):
                code = f"-{ref(cur.arg)}"
            elif isinstance(cur, Ln):
                code = f"_log({ref(cur.arg)})"
            elif isinstance(cur, Pow):
                e = cur.exponent
                b = ref(cur.base)
                if e == 1:
                    code = b
                elif e == -1:
                    code = f"1.0 / {b}"
                elif e.denominator == 1:
                    code = f"{b} ** {int(e)}"
                else:
                    code = f"_pow({b}, {float(e)!r})"
            else:  # pragma: no cover
                raise TypeError(type(cur))
            var = f"t{len(names)}"
            names[cur] = var
            lines.append(f"    {var} = {code}")
        return names[node]

    outs = [emit(e) for e in exprs]
    params = ", ".join(argnames[a] for a in args)
    src = [f"def {name}({params}):"] + lines + [f"    return ({', '.join(outs)}{',' if len(outs) == 1 else ''})"]
    namespace = {"_log": math.log, "_pow": math.pow}
    exec(compile("\n".join(src), f"<geothermo:{name}>", "exec"), namespace)
    raw = namespace[name]
    exprs = tuple(exprs)
    args = tuple(args)

    def fn(*values):
        try:
            return raw(*values)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            bindings = dict(zip(args, values))
            for e in exprs:
                evaluate(e, bindings)  # raises the precise DomainError
            raise DomainError(f"arithmetic fault: {exc}") from exc

    fn.source = "\n".join(src)
    fn.arguments = args
    return fn
