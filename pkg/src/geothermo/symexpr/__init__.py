"""Expression language: parse, print, differentiate, simplify, evaluate."""
from .calculus import derivative, differentiate
from .chart import Chart
from .evaluate import DomainError, EvaluationError, UnboundVariableError, compile_expressions, evaluate
from .nodes import (ONE, ZERO, Add, Const, Div, Expr, Ln, Mul, Neg, Pow, Sub, Var, as_exact,
                    free_variables, has_log, is_rational_function, lift, ln, size, substitute,
                    symbols)
from .parser import ParseError, UnknownFunctionError, parse
from .printer import to_text
from .simplify import DEFAULT_BUDGET, canonicalize, rational_normal_form, simplify


__all__ = [
    "Add", "Chart", "Const", "DEFAULT_BUDGET", "Div", "DomainError", "EvaluationError", "Expr",
    "Ln", "Mul", "Neg", "ONE", "ParseError", "Pow", "Sub", "UnboundVariableError",
    "UnknownFunctionError", "Var", "ZERO", "as_exact", "canonicalize", "compile_expressions",
    "derivative", "differentiate", "evaluate", "free_variables", "has_log",
    "is_rational_function", "lift", "ln", "parse", "rational_normal_form", "simplify", "size",
    "substitute", "symbols", "to_text",
]
