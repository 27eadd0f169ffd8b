"""Van der Waals gas in the entropy representation.

``S(U, V) = 3/2 ln(U + a/V) + ln(V - b)`` on the domain ``V > b``,
``U + a/V > 0``.  Curvature of the induced metric blows up where

    V^3 U - 2 a V^2 + 6 a b V - 3 a b^2 = 0,

which, with the pressure eliminated, is the cubic ``P V^3 - a V + 2 a b = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .contact import FundamentalSystem
from .geometry import MetricField
from .symexpr import Chart, Const, DomainError, Expr, as_exact, parse, substitute

ENTROPY = "3/2*ln(U + a/V) + ln(V - b)"

_CONFORMAL = "(5*U*V^2 - 3*U*V*b - a*V + 3*a*b)"
_W = ("(2*V^4*U^2 - 2*V^3*U*a - a^2*V^2 + 12*a*V^2*b*U + 6*V*b*a^2"
      " - 6*a*b^2*U*V - 3*b^2*a^2)")
_PREFACTOR = f"Lambda/2*{_CONFORMAL}/((U*V + a)^3*(V - b))"
BOUNDARY_POLYNOMIAL = "V^3*U - 2*V^2*a + 6*V*b*a - 3*b^2*a"


@dataclass(frozen=True)
class VdwParams:
    a: float = 1
    b: float = 1
    Lambda: float = 1

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"a and b must be non-negative (a={self.a}, b={self.b})")
        if self.Lambda == 0:
            raise ValueError("Lambda must be nonzero")

    @property
    def is_ideal(self) -> bool:
        return self.a == 0 and self.b == 0

    def exact(self) -> dict[str, Fraction]:
        return {"a": as_exact(self.a), "b": as_exact(self.b), "Lambda": as_exact(self.Lambda)}

    def bind(self, expr: Expr) -> Expr:
        return substitute(expr, {k: Const(v) for k, v in self.exact().items()})


@dataclass(frozen=True)
class StatePoint:
    U: float
    V: float

    def check(self, params: VdwParams) -> "StatePoint":
        if not self.V > params.b:
            raise DomainError(f"V = {self.V!r} must exceed b = {params.b!r}", None, self.V)
        if not self.U + params.a / self.V > 0:
            raise DomainError(f"U + a/V = {self.U + params.a / self.V!r} must be positive",
                              None, self.U + params.a / self.V)
        return self


def _state(p) -> StatePoint:
    if isinstance(p, StatePoint):
        return p
    if isinstance(p, dict):
        return StatePoint(p["U"], p["V"])
    U, V = p
    return StatePoint(U, V)


def in_domain(params: VdwParams, U: float, V: float) -> bool:
    return V > params.b and U + params.a / V > 0


def vdw_system(params: VdwParams = VdwParams()) -> FundamentalSystem:
    exact = params.exact()
    return FundamentalSystem(Chart(("U", "V")), parse(ENTROPY), "S",
                             {"a": exact["a"], "b": exact["b"]})


def temperature_pressure(params: VdwParams, p) -> tuple[float, float]:
    """``T = 2/3 (U + a/V)`` and ``P = (2UV^2 - aV + 3ab) / (3V^2 (V - b))``."""
    s = _state(p).check(params)
    U, V, a, b = s.U, s.V, params.a, params.b
    T = 2.0 / 3.0 * (U + a / V)
    P = (2 * U * V * V - a * V + 3 * a * b) / (3 * V * V * (V - b))
    return T, P


def vdw_metric_closed(params: VdwParams | None = VdwParams()) -> MetricField:
    """Closed-form induced metric over (U, V).

    ``params=None`` keeps ``a``, ``b`` and ``Lambda`` as symbols.
    """
    pre = f"({_PREFACTOR})"
    upper = {
        (0, 0): parse(f"{pre}*(-3/2)*V^2"),
        (0, 1): parse(f"{pre}*(3*a/2)"),
        (1, 1): parse(f"{pre}*(-{_W}/(2*V^2*(V - b)^2))"),
    }
    if params is not None:
        upper = {k: params.bind(v) for k, v in upper.items()}
    return MetricField.from_upper(("U", "V"), upper)


def ideal_gas_metric(Lambda: float = 1) -> MetricField:
    """``-(5 Lambda / 2) (3/2 dU^2/U^2 + dV^2/V^2)``."""
    lam = as_exact(Lambda)
    return MetricField.diagonal(("U", "V"), [
        substitute(parse("-(5*L/2)*(3/2)/U^2"), {"L": Const(lam)}),
        substitute(parse("-(5*L/2)/V^2"), {"L": Const(lam)}),
    ])


def boundary_polynomial(params: VdwParams, U: float, V: float) -> float:
    a, b = params.a, params.b
    return V ** 3 * U - 2 * V * V * a + 6 * V * b * a - 3 * b * b * a


def boundary_polynomial_expr(params: VdwParams | None = None) -> Expr:
    e = parse(BOUNDARY_POLYNOMIAL)
    return e if params is None else params.bind(e)


def conformal_factor(params: VdwParams, U: float, V: float) -> float:
    a, b = params.a, params.b
    return 5 * U * V * V - 3 * U * V * b - a * V + 3 * a * b


def locus_residual(params: VdwParams, U: float, V: float) -> float:
    """``|V^3 U - 2V^2 a + 6Vba - 3b^2 a| / max(1, |V^3 U|)``."""
    return abs(boundary_polynomial(params, U, V)) / max(1.0, abs(V ** 3 * U))


def denominator_factor_check(params: VdwParams, p) -> tuple[float, float, float, float]:
    """Both sides of the two factorizations of the curvature denominator.

    ``V^3 U - 2V^2 a + 6Vba - 3b^2 a = 3/2 (V - b)(P V^3 - aV + 2ab)`` and
    ``5UV^2 - 3UVb - aV + 3ab = 3V (V - b)(U + PV)``, with P from the
    equation of state.
    """
    s = _state(p)
    _, P = temperature_pressure(params, s)
    U, V, a, b = s.U, s.V, params.a, params.b
    lhs1 = boundary_polynomial(params, U, V)
    rhs1 = 1.5 * (V - b) * (P * V ** 3 - a * V + 2 * a * b)
    lhs2 = conformal_factor(params, U, V)
    rhs2 = 3 * V * (V - b) * (U + P * V)
    return lhs1, rhs1, lhs2, rhs2


def phase_boundary_energy(V: float, params: VdwParams) -> float:
    """U on the curvature-singular locus at volume V."""
    if not V > params.b:
        raise ValueError(f"V = {V!r} must exceed b = {params.b!r}")
    a, b = params.a, params.b
    return (2 * V * V * a - 6 * V * b * a + 3 * b * b * a) / V ** 3


# ---------------------------------------------------------------------------
# the cubic P V^3 - a V + 2ab


@dataclass(frozen=True)
class LocusRoot:
    V: float
    bracket: tuple[float, float]
    residual: float
    double: bool = False

    def as_dict(self) -> dict:
        return {"V": self.V, "bracket": list(self.bracket), "residual": self.residual,
                "double": self.double}


@dataclass(frozen=True)
class SingularLocusReport:
    P: float
    params: VdwParams
    roots: tuple[LocusRoot, ...]
    search_interval: tuple[float, float]

    @property
    def critical(self) -> dict | None:
        b = self.params.b
        if b <= 0:
            return None
        return {"P_c": self.params.a / (27 * b * b), "V_c": 3 * b}

    def as_dict(self) -> dict:
        return {
            "P": self.P,
            "a": self.params.a,
            "b": self.params.b,
            "search_interval": list(self.search_interval),
            "roots": [r.as_dict() for r in self.roots],
            "critical": self.critical,
        }


BISECTION_TOL = 1e-13


def _cubic(P, a, b):
    return lambda V: P * V ** 3 - a * V + 2 * a * b


def _bisect(f, lo, hi, flo):
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid, (mid, mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi), (lo, hi)


def singular_locus(P: float, params: VdwParams = VdwParams()) -> SingularLocusReport:
    """Real roots ``V > b`` of ``P V^3 - a V + 2ab``.

    The cubic has its only positive critical point at ``V* = sqrt(a / 3P)``,
    so (b, V*] and [V*, V_hi] each hold at most one root.  Roots are
    bracketed by sign changes and bisected to 1e-13; a vanishing value at
    V* is reported as a double root.
    """
    if not P > 0:
        raise ValueError(f"pressure must be positive, got {P!r}")
    a, b = params.a, params.b
    f = _cubic(P, a, b)
    vstar = math.sqrt(a / (3 * P))
    v_hi = max(3 * b, 2 * vstar) * 10
    roots: list[LocusRoot] = []

    def certify(V, bracket, double=False):
        roots.append(LocusRoot(V, bracket, abs(f(V)), double))

    def scale(V):
        return 1e-12 * max(1.0, abs(P) * V ** 3)

    def sign_right_of_b():
        fb = f(b)
        return fb if fb != 0 else 3 * P * b * b - a

    if v_hi > b:
        if vstar > b and abs(f(vstar)) <= scale(vstar):
            certify(vstar, (vstar, vstar), double=True)
        else:
            cuts = [b, vstar, v_hi] if vstar > b else [b, v_hi]
            for lo, hi in zip(cuts, cuts[1:]):
                flo = sign_right_of_b() if lo == b else f(lo)
                fhi = f(hi)
                if fhi == 0:
                    certify(hi, (hi, hi))
                elif (flo > 0) != (fhi > 0) and flo != 0:
                    V, br = _bisect(f, lo, hi, flo)
                    certify(V, br)
    roots.sort(key=lambda r: r.V)
    return SingularLocusReport(P, params, tuple(roots), (b, v_hi))
