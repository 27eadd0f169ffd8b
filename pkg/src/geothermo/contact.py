"""Phase-manifold layer: contact form, Legendre maps, GTD metrics and pullbacks.

The phase manifold has coordinates ``Z = (Phi, E1..En, I1..In)``.  A
fundamental system ``Phi(E)`` embeds the equilibrium manifold into it via
``E -> (Phi(E), E, dPhi/dE)``; metrics on the phase manifold pull back along
that embedding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import permutations
from typing import Mapping, Sequence

import numpy as np

from .geometry import DegenerateMetricError, MetricField
from .symexpr import (DEFAULT_BUDGET, Chart, Const, Expr, Mul, Var, as_exact, compile_expressions,
                      differentiate, free_variables, lift, parse, simplify, substitute)
from .symexpr.nodes import Add, balanced

# ---------------------------------------------------------------------------
# points and systems


@dataclass(frozen=True)
class PhasePoint:
    potential: float
    extensive: tuple
    intensive: tuple

    def __post_init__(self):
        object.__setattr__(self, "extensive", tuple(self.extensive))
        object.__setattr__(self, "intensive", tuple(self.intensive))
        if len(self.extensive) != len(self.intensive):
            raise ValueError("extensive and intensive parts must have equal length")

    @property
    def n(self) -> int:
        return len(self.extensive)

    def as_vector(self) -> np.ndarray:
        return np.array([self.potential, *self.extensive, *self.intensive], dtype=float)

    @classmethod
    def from_vector(cls, z: Sequence[float]) -> "PhasePoint":
        n = (len(z) - 1) // 2
        if len(z) != 2 * n + 1:
            raise ValueError("phase vector must have odd length 2n+1")
        return cls(z[0], tuple(z[1:n + 1]), tuple(z[n + 1:]))


def _exact_param(value):
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        return as_exact(value)
    raise TypeError(f"parameter values must be real numbers, got {value!r}")


@dataclass(frozen=True, eq=False)
class FundamentalSystem:
    """Fundamental equation ``potential = Phi(E)`` over *chart*.

    *parameters* are substituted exactly (floats through their decimal
    representation) before any differentiation.
    """

    chart: Chart
    potential: Expr
    name: str = "Phi"
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        chart = self.chart if isinstance(self.chart, Chart) else Chart(tuple(self.chart))
        object.__setattr__(self, "chart", chart)
        phi = parse(self.potential) if isinstance(self.potential, str) else lift(self.potential)
        object.__setattr__(self, "potential", phi)
        object.__setattr__(self, "parameters", dict(self.parameters))
        clash = set(self.parameters) & set(chart.coordinates)
        if clash:
            raise ValueError(f"parameters shadow coordinates: {sorted(clash)}")
        unknown = free_variables(phi) - set(chart.coordinates) - set(self.parameters)
        if unknown:
            raise ValueError(f"potential has unbound symbols: {sorted(unknown)}")

    @property
    def n(self) -> int:
        return self.chart.dim

    @cached_property
    def bound_potential(self) -> Expr:
        """Phi with all parameters replaced by exact constants."""
        mapping = {k: Const(_exact_param(v)) for k, v in self.parameters.items()}
        return simplify(substitute(self.potential, mapping))

    @cached_property
    def intensive_expressions(self) -> tuple[Expr, ...]:
        return tuple(differentiate(self.bound_potential, x) for x in self.chart.coordinates)

    @cached_property
    def hessian_expressions(self) -> tuple[tuple[Expr, ...], ...]:
        coords = self.chart.coordinates
        n = len(coords)
        rows = [[None] * n for _ in range(n)]
        for a in range(n):
            for b in range(a, n):
                rows[a][b] = rows[b][a] = differentiate(self.intensive_expressions[a], coords[b])
        return tuple(tuple(r) for r in rows)

    @cached_property
    def _compiled(self):
        exprs = [self.bound_potential, *self.intensive_expressions]
        return compile_expressions(exprs, self.chart.coordinates, "embedding")

    def coordinates_of(self, point) -> tuple[float, ...]:
        if isinstance(point, Mapping):
            return tuple(float(point[x]) for x in self.chart.coordinates)
        values = tuple(float(x) for x in point)
        if len(values) != self.n:
            raise ValueError(f"expected {self.n} coordinates, got {len(values)}")
        return values


def intensive_of(system: FundamentalSystem, point) -> tuple[float, ...]:
    """``I_a = dPhi/dE^a`` at *point* (mapping or sequence in chart order)."""
    return tuple(system._compiled(*system.coordinates_of(point))[1:])


def embed(system: FundamentalSystem, point) -> PhasePoint:
    e = system.coordinates_of(point)
    values = system._compiled(*e)
    return PhasePoint(values[0], e, tuple(values[1:]))


def theta_residual(system: FundamentalSystem, point, tangent: Sequence[float],
                   phase_point: PhasePoint | None = None) -> float:
    """Contact form evaluated on the pushforward of *tangent*.

    ``Theta(phi_* v) = sum_a (dPhi/dE^a - I_a) v^a`` with ``I_a`` read from
    *phase_point* (the embedded point by default).  Zero up to rounding on
    the embedding; an offset ``delta`` in ``I_a`` yields ``-delta * v^a``.
    """
    e = system.coordinates_of(point)
    values = system._compiled(*e)
    grad = values[1:]
    z = phase_point if phase_point is not None else PhasePoint(values[0], e, grad)
    v = tuple(float(x) for x in tangent)
    if len(v) != system.n:
        raise ValueError(f"tangent must have {system.n} components")
    return math.fsum((g - i) * w for g, i, w in zip(grad, z.intensive, v))


# ---------------------------------------------------------------------------
# exterior algebra on the phase manifold


def _wedge(f1: dict, f2: dict) -> dict:
    """Wedge product of forms stored as {sorted index tuple: coefficient}."""
    out: dict = {}
    for k1, c1 in f1.items():
        for k2, c2 in f2.items():
            if set(k1) & set(k2):
                continue
            merged = k1 + k2
            # parity of the sorting permutation = number of inversions
            inv = sum(1 for i in k1 for j in k2 if i > j)
            key = tuple(sorted(merged))
            out[key] = out.get(key, 0) + (-c1 * c2 if inv % 2 else c1 * c2)
    return {k: c for k, c in out.items() if c != 0}


def _permutation_sign(seq: Sequence[int]) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        while seq[i] != i:
            j = seq[i]
            seq[i], seq[j] = seq[j], seq[i]
            sign = -sign
    return sign


def contact_nondegeneracy(point: PhasePoint, normalized: bool = True):
    """Coefficient of ``Theta ^ (dTheta)^n`` on ``dPhi^dI1..dIn^dE1..dEn``.

    With ``normalized`` the ``n!`` from expanding ``(dTheta)^n`` is divided
    out, leaving ``+-1`` at every point.
    """
    n = point.n
    # indices: 0 = Phi, 1..n = E, n+1..2n = I
    theta = {(0,): 1}
    for a in range(n):
        if point.intensive[a] != 0:
            theta[(1 + a,)] = -point.intensive[a]
    dtheta: dict = {}
    for a in range(n):
        # d(-I_a dE^a) = -dI_a ^ dE^a = +dE^a ^ dI_a
        dtheta[(1 + a, 1 + n + a)] = 1
    form = theta
    for _ in range(n):
        form = _wedge(form, dtheta)
    full = tuple(range(2 * n + 1))
    coeff = form.get(full, 0)
    # re-express in the ordering (Phi, I..., E...)
    order = [0, *range(n + 1, 2 * n + 1), *range(1, n + 1)]
    coeff *= _permutation_sign(order)
    return coeff / math.factorial(n) if normalized else coeff


# ---------------------------------------------------------------------------
# Legendre maps


def partial_legendre(point: PhasePoint, indices) -> PhasePoint:
    """Swap the pairs in *indices* (0-based): ``E~ = I``, ``I~ = -E``.

    The potential shifts by ``-sum_k I_k E_k`` over the swapped pairs.
    """
    idx = set(indices)
    for k in idx:
        if not isinstance(k, int) or not 0 <= k < point.n:
            raise IndexError(f"Legendre index {k!r} out of range for n={point.n}")
    phi = point.potential
    e = list(point.extensive)
    i = list(point.intensive)
    for k in sorted(idx):
        phi = phi - point.intensive[k] * point.extensive[k]
        e[k], i[k] = point.intensive[k], -point.extensive[k]
    return PhasePoint(phi, tuple(e), tuple(i))


def total_legendre(point: PhasePoint) -> PhasePoint:
    return partial_legendre(point, range(point.n))


def legendre_jacobian(point: PhasePoint) -> np.ndarray:
    """Jacobian of the total Legendre map in ``(Phi, E, I)`` coordinates."""
    n = point.n
    J = np.zeros((2 * n + 1, 2 * n + 1))
    J[0, 0] = 1.0
    for a in range(n):
        J[0, 1 + a] = -float(point.intensive[a])
        J[0, 1 + n + a] = -float(point.extensive[a])
        J[1 + a, 1 + n + a] = 1.0
        J[1 + n + a, 1 + a] = -1.0
    return J


# ---------------------------------------------------------------------------
# metrics on the phase manifold


def phase_chart(n: int) -> Chart:
    return Chart(("Phi", *(f"E{a + 1}" for a in range(n)), *(f"I{a + 1}" for a in range(n))))


@dataclass(frozen=True)
class GtdMetricSpec:
    """``G = Theta^2 + Lambda (E.I) (chi_cd dE^c dI^d)`` with ``xi = delta``.

    ``chi`` is ``"delta"`` (first-order transitions) or ``"eta"``
    (``diag(-1, 1, ..., 1)``).
    """

    Lambda: float = 1
    chi: str = "delta"

    def __post_init__(self):
        if self.Lambda == 0:
            raise ValueError("Lambda must be nonzero")
        if self.chi not in ("delta", "eta"):
            raise ValueError(f"chi must be 'delta' or 'eta', got {self.chi!r}")

    def chi_diagonal(self, n: int) -> tuple[int, ...]:
        if self.chi == "delta":
            return (1,) * n
        return (-1,) + (1,) * (n - 1)


def _theta_squared(n: int) -> list[list[Expr]]:
    size = 2 * n + 1
    coeff = [Const(1)] + [-Var(f"I{a + 1}") for a in range(n)] + [Const(0)] * n
    rows = [[simplify(Mul(coeff[A], coeff[B])) for B in range(size)] for A in range(size)]
    return rows


def _add_pair_term(rows, n: int, weights: Sequence[Expr]):
    """Add ``w_c dE^c dI^c`` (symmetrized) into *rows*."""
    for c in range(n):
        i, j = 1 + c, 1 + n + c
        half = simplify(Mul(Const(Fraction(1, 2)), weights[c]))
        rows[i][j] = simplify(Add(rows[i][j], half))
        rows[j][i] = rows[i][j]


def gtd_metric(spec: GtdMetricSpec, n: int) -> MetricField:
    rows = _theta_squared(n)
    conformal = balanced(Add, [Mul(Var(f"E{a + 1}"), Var(f"I{a + 1}")) for a in range(n)])
    lam = Const(as_exact(spec.Lambda))
    chi = spec.chi_diagonal(n)
    _add_pair_term(rows, n, [Mul(Mul(lam, Const(chi[c])), conformal) for c in range(n)])
    return MetricField(phase_chart(n), tuple(tuple(r) for r in rows))


def hessian_generating_metric(n: int) -> MetricField:
    """``Theta^2 + delta_ab dE^a dI^b``; pulls back to the Hessian of Phi."""
    rows = _theta_squared(n)
    _add_pair_term(rows, n, [Const(1)] * n)
    return MetricField(phase_chart(n), tuple(tuple(r) for r in rows))


def flat_phase_metric(n: int) -> MetricField:
    return MetricField.diagonal(phase_chart(n), [1] * (2 * n + 1))


def _det_is_zero(rows, budget) -> bool:
    n = len(rows)
    if n == 1:
        d = rows[0][0]
    elif n == 2:
        d = rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    elif n == 3:
        d = (rows[0][0] * (rows[1][1] * rows[2][2] - rows[1][2] * rows[2][1])
             - rows[0][1] * (rows[1][0] * rows[2][2] - rows[1][2] * rows[2][0])
             + rows[0][2] * (rows[1][0] * rows[2][1] - rows[1][1] * rows[2][0]))
    else:
        return all(c == Const(0) for r in rows for c in r)
    return simplify(d, budget=budget) == Const(0)


def _checked(system: FundamentalSystem, rows, budget) -> MetricField:
    if _det_is_zero(rows, budget):
        raise DegenerateMetricError("induced metric is degenerate (determinant vanishes identically)")
    return MetricField(system.chart, tuple(tuple(r) for r in rows))


def pullback(system: FundamentalSystem, G: MetricField,
             budget: int = DEFAULT_BUDGET) -> MetricField:
    """``g_ab = dZ^A/dE^a dZ^B/dE^b G_AB(Z(E))`` along the embedding.

    Raises DegenerateMetricError if the result has identically vanishing
    determinant.
    """
    n = system.n
    if G.chart != phase_chart(n):
        raise ValueError(f"expected a metric on {phase_chart(n).coordinates}")
    coords = system.chart.coordinates
    mapping = {"Phi": system.bound_potential}
    for a in range(n):
        mapping[f"E{a + 1}"] = Var(coords[a])
        mapping[f"I{a + 1}"] = system.intensive_expressions[a]
    # dZ^A/dE^a
    jac = [list(system.intensive_expressions)]
    jac += [[Const(1 if a == b else 0) for b in range(n)] for a in range(n)]
    jac += [list(system.hessian_expressions[a]) for a in range(n)]
    size = 2 * n + 1
    G_on = [[substitute(G.components[A][B], mapping) for B in range(size)] for A in range(size)]
    rows = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(a, n):
            terms = [Mul(Mul(jac[A][a], jac[B][b]), G_on[A][B])
                     for A in range(size) for B in range(size)
                     if G.components[A][B] != Const(0)]
            rows[a][b] = rows[b][a] = simplify(balanced(Add, terms) if terms else Const(0),
                                              budget=budget)
    return _checked(system, rows, budget)


def induce_metric(system: FundamentalSystem, spec: GtdMetricSpec = GtdMetricSpec(),
                  budget: int = DEFAULT_BUDGET) -> MetricField:
    """Metric induced on the equilibrium manifold by the GTD metric *spec*."""
    return pullback(system, gtd_metric(spec, system.n), budget)


def induced_metric_closed_form(system: FundamentalSystem, spec: GtdMetricSpec = GtdMetricSpec(),
                               budget: int = DEFAULT_BUDGET) -> MetricField:
    """``Lambda (E^a dPhi/dE^a) chi-weighted Hessian`` without the pullback."""
    n = system.n
    coords = system.chart.coordinates
    lam = Const(as_exact(spec.Lambda))
    conformal = balanced(Add, [Mul(Var(coords[a]), system.intensive_expressions[a])
                               for a in range(n)])
    chi = spec.chi_diagonal(n)
    H = system.hessian_expressions
    rows = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(a, n):
            w = Const(Fraction(chi[a] + chi[b], 2))
            rows[a][b] = rows[b][a] = simplify(Mul(Mul(lam, conformal), Mul(w, H[a][b])),
                                              budget=budget)
    return _checked(system, rows, budget)


def hessian_metric(system: FundamentalSystem, budget: int = DEFAULT_BUDGET) -> MetricField:
    """``g_ab = d^2 Phi / dE^a dE^b``."""
    return _checked(system, [list(r) for r in system.hessian_expressions], budget)


# ---------------------------------------------------------------------------
# Legendre-invariance verdicts

METRIC_KINDS = ("gtd-first-order", "gtd-second-order", "hessian", "flat")
INVARIANCE_THRESHOLD = 1e-9


def phase_metric(kind: str, n: int, Lambda: float = 1) -> MetricField:
    if kind == "gtd-first-order":
        return gtd_metric(GtdMetricSpec(Lambda, "delta"), n)
    if kind == "gtd-second-order":
        return gtd_metric(GtdMetricSpec(Lambda, "eta"), n)
    if kind == "hessian":
        return hessian_generating_metric(n)
    if kind == "flat":
        return flat_phase_metric(n)
    raise ValueError(f"unknown metric kind {kind!r}; choose from {METRIC_KINDS}")


@dataclass(frozen=True)
class InvarianceReport:
    metric: str
    n: int
    trials: int
    max_deviation: float
    redraws: int
    threshold: float = INVARIANCE_THRESHOLD

    @property
    def passed(self) -> bool:
        return self.max_deviation < self.threshold

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def as_dict(self) -> dict:
        return {"metric": self.metric, "n": self.n, "trials": self.trials,
                "max_deviation": self.max_deviation, "threshold": self.threshold,
                "redraws": self.redraws, "verdict": self.verdict}


MAX_REDRAWS = 10


def legendre_invariance_check(metric, n: int = 2, trials: int = 100, seed: int = 0,
                              Lambda: float = 1) -> InvarianceReport:
    """Compare ``G(z)(w, w)`` with ``G(F z)(F_* w, F_* w)`` for the total map F.

    *metric* is a kind name from :data:`METRIC_KINDS`, a
    :class:`GtdMetricSpec`, or a MetricField on ``phase_chart(n)``.  Points
    are drawn with ``E, I`` in [0.5, 2] and ``Phi`` in [-1, 1]; tangents in
    [-1, 1].  Draws where ``|G(w, w)|`` is below 1e-8 are re-drawn, at most
    10 times per trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if isinstance(metric, str):
        label, G = metric, phase_metric(metric, n, Lambda)
    elif isinstance(metric, GtdMetricSpec):
        label, G = f"gtd-{metric.chi}", gtd_metric(metric, n)
    else:
        label, G = "custom", metric
    if G.chart != phase_chart(n):
        raise ValueError(f"metric must live on {phase_chart(n).coordinates}")
    rng = np.random.default_rng(seed)
    worst = 0.0
    redraws = 0
    for _ in range(trials):
        for attempt in range(MAX_REDRAWS + 1):
            z = PhasePoint(rng.uniform(-1, 1), tuple(rng.uniform(0.5, 2, n)),
                           tuple(rng.uniform(0.5, 2, n)))
            w = rng.uniform(-1, 1, 2 * n + 1)
            before = float(w @ G.numeric(z.as_vector()) @ w)
            if abs(before) >= 1e-8 or attempt == MAX_REDRAWS:
                break
            redraws += 1
        zt = total_legendre(z)
        wt = legendre_jacobian(z) @ w
        after = float(wt @ G.numeric(zt.as_vector()) @ wt)
        scale = max(abs(before), abs(after), 1e-300)
        worst = max(worst, abs(after - before) / scale)
    return InvarianceReport(label, n, trials, worst, redraws)
