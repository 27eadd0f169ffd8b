"""Riemannian machinery over a chart: Christoffel symbols, curvature, evaluation.

Conventions::

    Γ^a_bc   = ½ g^ad (∂_b g_dc + ∂_c g_db − ∂_d g_bc)
    R^a_bcd  = ∂_c Γ^a_db − ∂_d Γ^a_cb + Γ^a_ce Γ^e_db − Γ^a_de Γ^e_cb
    R_bd     = R^a_bad
    R        = g^bd R_bd

With these signs the unit 2-sphere has R = +2.

Metrics whose components are rational functions are handled exactly in a
fraction field (the curvature denominator then comes out fully reduced and
factored).  Anything else goes through expression-level differentiation and
simplification under a node budget.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .symexpr import (DEFAULT_BUDGET, Add, Chart, Const, Div, DomainError, Expr, Mul, Neg, Sub,
                      UnboundVariableError, compile_expressions, derivative, free_variables, lift,
                      parse, simplify, substitute)
from .symexpr.nodes import balanced
from .symexpr.rational import (NotRational, fraction_field, from_fraction, from_polynomial,
                               poly_terms, to_fraction)


class DegenerateMetricError(ValueError):
    """The metric determinant vanishes identically."""


class SingularProximityError(DomainError):
    """Point too close to a curvature singularity for a meaningful value."""

    def __init__(self, message: str, denominator: float, ratio: float):
        self.denominator = denominator
        self.ratio = ratio
        super().__init__(message, None, denominator)


def _as_expr(value) -> Expr:
    return parse(value) if isinstance(value, str) else lift(value)


@dataclass(frozen=True, eq=False)
class MetricField:
    """Symmetric matrix of expressions ``g_ab`` over a chart.

    Variables that are not chart coordinates are parameters; they must be
    bound in every evaluation point.
    """

    chart: Chart
    components: tuple[tuple[Expr, ...], ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        chart = self.chart if isinstance(self.chart, Chart) else Chart(tuple(self.chart))
        object.__setattr__(self, "chart", chart)
        rows = tuple(tuple(_as_expr(c) for c in row) for row in self.components)
        n = chart.dim
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"metric must be {n}x{n} for chart {chart.coordinates}")
        for a in range(n):
            for b in range(a + 1, n):
                if rows[a][b] != rows[b][a]:
                    raise ValueError(f"metric not symmetric at ({a}, {b})")
        object.__setattr__(self, "components", rows)

    @classmethod
    def from_upper(cls, chart, upper: Mapping[tuple[int, int], object]) -> "MetricField":
        """Build from ``{(a, b): component}`` with a <= b; missing entries are 0."""
        chart = chart if isinstance(chart, Chart) else Chart(tuple(chart))
        n = chart.dim
        rows = [[Const(0)] * n for _ in range(n)]
        for (a, b), value in upper.items():
            e = _as_expr(value)
            rows[a][b] = e
            rows[b][a] = e
        return cls(chart, tuple(tuple(r) for r in rows))

    @classmethod
    def diagonal(cls, chart, entries: Sequence) -> "MetricField":
        return cls.from_upper(chart, {(i, i): e for i, e in enumerate(entries)})

    @property
    def dim(self) -> int:
        return self.chart.dim

    def __getitem__(self, ab) -> Expr:
        a, b = ab
        return self.components[a][b]

    @cached_property
    def parameters(self) -> tuple[str, ...]:
        names = set()
        for row in self.components:
            for c in row:
                names |= free_variables(c)
        return tuple(sorted(names - set(self.chart.coordinates)))

    @property
    def arguments(self) -> tuple[str, ...]:
        return self.chart.coordinates + self.parameters

    def substitute(self, mapping) -> "MetricField":
        return MetricField(self.chart, tuple(tuple(substitute(c, mapping) for c in row)
                                             for row in self.components))

    def scaled(self, factor) -> "MetricField":
        f = lift(factor)
        return MetricField(self.chart, tuple(tuple(Mul(f, c) for c in row)
                                             for row in self.components))

    def simplified(self, budget: int = DEFAULT_BUDGET) -> "MetricField":
        return MetricField(self.chart, tuple(tuple(simplify(c, budget=budget) for c in row)
                                             for row in self.components))

    @cached_property
    def _compiled(self):
        flat = [c for row in self.components for c in row]
        return compile_expressions(flat, self.arguments, "metric")

    def point_values(self, point) -> tuple[float, ...]:
        return _point_values(self.arguments, self.chart, point)

    def numeric(self, point) -> np.ndarray:
        n = self.dim
        values = self._compiled(*self.point_values(point))
        return np.array(values, dtype=float).reshape(n, n)


def _point_values(arguments, chart: Chart, point) -> tuple[float, ...]:
    if isinstance(point, Mapping):
        try:
            return tuple(float(point[a]) for a in arguments)
        except KeyError as exc:
            raise UnboundVariableError(exc.args[0]) from None
    values = tuple(float(x) for x in point)
    if len(values) != len(arguments):
        raise ValueError(f"expected values for {arguments}, got {len(values)}")
    return values


@dataclass(frozen=True, eq=False)
class ChristoffelField:
    """``symbols[a][b][c]`` is Γ^a_bc, symmetric in (b, c)."""

    chart: Chart
    symbols: tuple
    arguments: tuple[str, ...]

    @cached_property
    def _compiled(self):
        n = self.chart.dim
        flat = [self.symbols[a][b][c] for a in range(n) for b in range(n) for c in range(n)]
        return compile_expressions(flat, self.arguments, "christoffel")

    def numeric(self, point) -> np.ndarray:
        n = self.chart.dim
        vals = self._compiled(*_point_values(self.arguments, self.chart, point))
        return np.array(vals, dtype=float).reshape(n, n, n)


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Riemann ``R^a_bcd``, Ricci ``R_bd`` and scalar curvature.

    ``singular_factors`` lists ``(polynomial, multiplicity)`` pairs whose
    product is the reduced denominator of the scalar curvature; it is empty
    when the denominator is unknown (non-rational metrics) or constant.
    """

    chart: Chart
    riemann: tuple
    ricci: tuple
    scalar: Expr
    arguments: tuple[str, ...]
    scalar_numerator: Expr | None = None
    scalar_denominator: Expr | None = None
    singular_factors: tuple = ()
    exact: bool = False
    denominator_content: Fraction = Fraction(1)

    @cached_property
    def _scalar_fn(self):
        if not self.singular_factors:
            return compile_expressions([self.scalar], self.arguments, "scalar")
        # the expanded denominator cancels badly near its zeros; evaluate
        # it as content * prod(factor^m) instead
        exprs = [self.scalar_numerator, *(f for f, _ in self.singular_factors)]
        fn = compile_expressions(exprs, self.arguments, "scalar")
        mults = [m for _, m in self.singular_factors]
        content = float(self.denominator_content)

        def scalar(*values):
            num, *fs = fn(*values)
            den = content
            for f, m in zip(fs, mults):
                den *= f ** m
            if den == 0.0:
                raise DomainError("scalar curvature denominator vanishes", self.scalar_denominator,
                                  0.0)
            return (num / den,)
        return scalar

    @cached_property
    def _factor_fns(self):
        exprs = [f for f, _ in self.singular_factors]
        return compile_expressions(exprs, self.arguments, "factors") if exprs else None

    @cached_property
    def _factor_terms(self):
        return [_TermScale(f, self.arguments) for f, _ in self.singular_factors]

    def scalar_value(self, point) -> float:
        return self._scalar_fn(*_point_values(self.arguments, self.chart, point))[0]

    def factor_values(self, point) -> tuple[float, ...]:
        """Each singular factor evaluated at *point*."""
        if not self.singular_factors:
            return ()
        return self._factor_fns(*_point_values(self.arguments, self.chart, point))

    def denominator_value(self, point) -> float:
        """Value of the reduced scalar-curvature denominator (1.0 if none)."""
        if not self.singular_factors:
            return 1.0
        values = _point_values(self.arguments, self.chart, point)
        out = 1.0
        for v, (_, m) in zip(self._factor_fns(*values), self.singular_factors):
            out *= v ** m
        return out

    def denominator_ratio(self, point) -> float:
        """``|D(p)|`` relative to the magnitude of its own terms at p.

        Each factor is divided by the sum of the absolute values of its
        monomials, so the ratio is scale free and lies in [0, 1].
        """
        if not self.singular_factors:
            return 1.0
        values = _point_values(self.arguments, self.chart, point)
        ratio = 1.0
        for v, ts, (_, m) in zip(self._factor_fns(*values), self._factor_terms,
                                 self.singular_factors):
            scale = ts(values)
            ratio *= (abs(v) / scale) ** m if scale > 0 else 0.0
        return ratio


class _TermScale:
    """Σ |c_k| |x|^k over the monomials of an expanded polynomial."""

    def __init__(self, poly: Expr, arguments: tuple[str, ...]):
        elem, names = to_fraction(poly, arguments)
        index = {n: i for i, n in enumerate(arguments)}
        self.terms = [(abs(float(c)), [(index[n], k) for n, k in key])
                      for key, c in poly_terms(elem.numer, names).items()]
        self.scale = abs(float(elem.denom.LC)) if elem.denom != 1 else 1.0

    def __call__(self, values) -> float:
        total = 0.0
        for c, mono in self.terms:
            t = c
            for i, k in mono:
                t *= abs(values[i]) ** k
            total += t
        return total / self.scale


# ---------------------------------------------------------------------------
# symbolic construction


def _field_inverse(rows):
    n = len(rows)
    det = _field_det(rows)
    if not det:
        raise DegenerateMetricError("metric determinant vanishes identically")
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[rows[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
            cof = _field_det(minor) if minor else rows[0][0] ** 0
            inv[i][j] = cof / det if (i + j) % 2 == 0 else -cof / det
    return inv, det


def _field_det(rows):
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = 0
    for j in range(n):
        minor = [[rows[r][c] for c in range(n) if c != j] for r in range(1, n)]
        term = rows[0][j] * _field_det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def _rational_geometry(g: MetricField):
    """Exact Γ and curvature in the fraction field, or None if not rational."""
    if "rational" in g._cache:
        return g._cache["rational"]
    names = tuple(sorted(g.arguments))
    try:
        rows = [[to_fraction(c, names)[0] for c in row] for row in g.components]
    except (NotRational, ZeroDivisionError):
        g._cache["rational"] = None
        return None
    n = g.dim
    gens = [fraction_field(names)[1][x] for x in g.chart.coordinates]
    inv, det = _field_inverse(rows)
    dg = [[[rows[i][j].diff(gens[k]) for k in range(n)] for j in range(n)] for i in range(n)]
    gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(n):
            for c in range(b, n):
                s = 0
                for d in range(n):
                    s = s + inv[a][d] * (dg[d][c][b] + dg[d][b][c] - dg[b][c][d])
                gamma[a][b][c] = gamma[a][c][b] = s / 2
    result = {"names": names, "g": rows, "inv": inv, "det": det, "gamma": gamma}
    g._cache["rational"] = result
    return result


def _rational_curvature(g: MetricField, geo):
    n = g.dim
    gamma = geo["gamma"]
    gens = [fraction_field(geo["names"])[1][x] for x in g.chart.coordinates]
    zero = geo["g"][0][0] * 0
    dgamma = [[[[gamma[a][b][c].diff(gens[k]) for k in range(n)] for c in range(n)]
               for b in range(n)] for a in range(n)]
    riem = [[[[zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for a, b in product(range(n), repeat=2):
        for c in range(n):
            for d in range(c + 1, n):
                v = dgamma[a][d][b][c] - dgamma[a][c][b][d]
                for e in range(n):
                    v = v + gamma[a][c][e] * gamma[e][d][b] - gamma[a][d][e] * gamma[e][c][b]
                riem[a][b][c][d] = v
                riem[a][b][d][c] = -v
    ricci = [[sum((riem[a][b][a][d] for a in range(n)), zero) for d in range(n)] for b in range(n)]
    inv = geo["inv"]
    scalar = sum((inv[b][d] * ricci[b][d] for b in range(n) for d in range(n)), zero)
    return riem, ricci, scalar


def _expr_inverse(rows, budget):
    n = len(rows)
    if n > 3:
        raise NotImplementedError("symbolic inversion of non-rational metrics is limited to n <= 3")

    def det(m):
        k = len(m)
        if k == 1:
            return m[0][0]
        if k == 2:
            return Sub(Mul(m[0][0], m[1][1]), Mul(m[0][1], m[1][0]))
        terms = []
        for j in range(k):
            minor = [[m[r][c] for c in range(k) if c != j] for r in range(1, k)]
            t = Mul(m[0][j], det(minor))
            terms.append(t if j % 2 == 0 else Neg(t))
        return balanced(Add, terms)

    d = simplify(det(rows), budget=budget)
    if isinstance(d, Const) and d.value == 0:
        raise DegenerateMetricError("metric determinant vanishes identically")
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[rows[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
            cof = det(minor) if minor else Const(1)
            if (i + j) % 2:
                cof = Neg(cof)
            inv[i][j] = simplify(Div(cof, d), budget=budget)
    return inv


def _simp(e: Expr, budget: int) -> Expr:
    return simplify(e, budget=budget)


def christoffel(g: MetricField, budget: int = DEFAULT_BUDGET) -> ChristoffelField:
    """Symbolic Christoffel symbols of the Levi-Civita connection of *g*.

    Raises DegenerateMetricError if det(g) is identically zero.
    """
    key = ("christoffel", budget)
    if key in g._cache:
        return g._cache[key]
    n = g.dim
    coords = g.chart.coordinates
    geo = _rational_geometry(g)
    if geo is not None:
        names = geo["names"]
        symbols = tuple(tuple(tuple(from_fraction(geo["gamma"][a][b][c], names)
                                    for c in range(n)) for b in range(n)) for a in range(n))
    else:
        rows = g.components
        inv = _expr_inverse(rows, budget)
        dg = [[[derivative(rows[i][j], coords[k]) for k in range(n)] for j in range(n)]
              for i in range(n)]
        sym = [[[None] * n for _ in range(n)] for _ in range(n)]
        for a in range(n):
            for b in range(n):
                for c in range(b, n):
                    terms = [Mul(inv[a][d], Sub(Add(dg[d][c][b], dg[d][b][c]), dg[b][c][d]))
                             for d in range(n)]
                    s = _simp(Div(balanced(Add, terms), Const(2)), budget)
                    sym[a][b][c] = sym[a][c][b] = s
        symbols = tuple(tuple(tuple(r) for r in m) for m in sym)
    out = ChristoffelField(g.chart, symbols, g.arguments)
    g._cache[key] = out
    return out


def riemann(g: MetricField, budget: int = DEFAULT_BUDGET) -> CurvatureField:
    """Riemann, Ricci and scalar curvature of *g* (see module conventions)."""
    key = ("riemann", budget)
    if key in g._cache:
        return g._cache[key]
    n = g.dim
    coords = g.chart.coordinates
    geo = _rational_geometry(g)
    if geo is not None:
        names = geo["names"]
        riem, ricci, scalar = _rational_curvature(g, geo)
        conv = lambda x: from_fraction(x, names)  # noqa: E731
        riem_e = tuple(tuple(tuple(tuple(conv(riem[a][b][c][d]) for d in range(n))
                                   for c in range(n)) for b in range(n)) for a in range(n))
        ricci_e = tuple(tuple(conv(x) for x in row) for row in ricci)
        numer = from_polynomial(scalar.numer, names)
        content = 1
        if scalar.denom == 1 or not scalar.numer:
            denom, factors = None, ()
        else:
            denom = from_polynomial(scalar.denom, names)
            content, flist = scalar.denom.factor_list()
            factors = tuple((from_polynomial(p, names), int(m)) for p, m in flist
                            if not p.is_ground)
            for p, m in flist:
                if p.is_ground:
                    content *= p.LC ** m
        out = CurvatureField(g.chart, riem_e, ricci_e, conv(scalar), g.arguments,
                             numer, denom, factors, exact=True,
                             denominator_content=Fraction(int(content.numerator),
                                                          int(content.denominator))
                             if factors else Fraction(1))
    else:
        gam = christoffel(g, budget).symbols
        dgam = {}

        def dG(a, b, c, k):
            keyd = (a, min(b, c), max(b, c), k)
            if keyd not in dgam:
                dgam[keyd] = derivative(gam[a][b][c], coords[k])
            return dgam[keyd]

        zero = Const(0)
        riem = [[[[zero] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
        for a, b in product(range(n), repeat=2):
            for c in range(n):
                for d in range(c + 1, n):
                    terms = [dG(a, d, b, c), Neg(dG(a, c, b, d))]
                    for e in range(n):
                        terms.append(Mul(gam[a][c][e], gam[e][d][b]))
                        terms.append(Neg(Mul(gam[a][d][e], gam[e][c][b])))
                    v = _simp(balanced(Add, terms), budget)
                    riem[a][b][c][d] = v
                    riem[a][b][d][c] = _simp(Neg(v), budget)
        ricci = [[_simp(balanced(Add, [riem[a][b][a][d] for a in range(n)]), budget)
                  for d in range(n)] for b in range(n)]
        inv = _expr_inverse(g.components, budget)
        scalar = _simp(balanced(Add, [Mul(inv[b][d], ricci[b][d])
                                      for b in range(n) for d in range(n)]), budget)
        out = CurvatureField(
            g.chart,
            tuple(tuple(tuple(tuple(x) for x in c) for c in b) for b in riem),
            tuple(tuple(r) for r in ricci), scalar, g.arguments)
    g._cache[key] = out
    return out


# ---------------------------------------------------------------------------
# numeric evaluation


@dataclass(frozen=True)
class MetricAtPoint:
    matrix: np.ndarray
    det: float
    signature: tuple[int, int]  # (positive, negative) eigenvalue counts
    singular: bool


SINGULAR_DET = 1e-13


def metric_eval(g: MetricField, point) -> MetricAtPoint:
    """Numeric metric at *point* with determinant and signature.

    ``singular`` is set when ``|det| < 1e-13 * max|g_ab|^n``.
    """
    m = g.numeric(point)
    det = float(np.linalg.det(m))
    eig = np.linalg.eigvalsh(m)
    scale = float(np.max(np.abs(m))) ** g.dim
    tol = 1e-12 * float(np.max(np.abs(eig))) if eig.size else 0.0
    signature = (int(np.sum(eig > tol)), int(np.sum(eig < -tol)))
    return MetricAtPoint(m, det, signature, abs(det) < SINGULAR_DET * scale)


def christoffel_at(g: MetricField, point) -> np.ndarray:
    return christoffel(g).numeric(point)


NEAR_SINGULAR = 1e-10


def scalar_curvature_at(g: MetricField, point, reference=None,
                        threshold: float = NEAR_SINGULAR) -> float:
    """Numeric scalar curvature at *point*.

    A point is near-singular when the reduced denominator of R is below
    ``threshold`` times its value at *reference*; without a reference, the
    denominator is compared to the size of its own terms at *point* (see
    :meth:`CurvatureField.denominator_ratio`).  Near-singular points raise
    :class:`SingularProximityError`.
    """
    curv = riemann(g)
    if curv.singular_factors:
        d = curv.denominator_value(point)
        if reference is not None:
            ratio = abs(d) / abs(curv.denominator_value(reference))
        else:
            ratio = curv.denominator_ratio(point)
        if ratio < threshold:
            raise SingularProximityError(
                f"point is near a curvature singularity (denominator {d:.3e}, ratio {ratio:.3e})",
                d, ratio)
    return curv.scalar_value(point)
