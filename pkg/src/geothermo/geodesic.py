"""Geodesics of 2-dimensional equilibrium metrics.

The second-order system ``E'' + Gamma(E', E') = 0`` is integrated in
first-order form by an adaptive Dormand-Prince 5(4) scheme with PI step
control.  Integration stops at ``tau_max``, when a guard polynomial (for
the van der Waals gas, the curvature-denominator factor) falls to a small
fraction of its initial value, when the state leaves the validity domain,
or when the step size underflows.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .geometry import MetricField, christoffel
from .symexpr import DomainError, Expr, compile_expressions, parse
from .vdw import VdwParams, boundary_polynomial_expr, locus_residual, vdw_metric_closed


class Termination(str, enum.Enum):
    MAX_TAU = "max-tau"
    SINGULAR_BOUNDARY = "singular-boundary"
    DOMAIN_EXIT = "domain-exit"
    STEP_UNDERFLOW = "step-underflow"
    MAX_STEPS = "max-steps"


class InvalidInitialState(ValueError):
    pass


@dataclass(frozen=True)
class GeodesicOptions:
    rtol: float = 1e-8
    atol: float = 1e-10
    tau_max: float = 100.0
    max_steps: int = 1_000_000
    min_step: float = 1e-12
    guard_ratio: float = 1e-6
    refine_tol: float = 1e-10
    max_coordinate: float = 1e12
    first_step: float | None = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if not self.tau_max > 0:
            raise ValueError("tau_max must be positive")


@dataclass(frozen=True, eq=False)
class GeodesicProblem:
    """Initial-value problem for a geodesic of *metric*.

    ``guard`` is a polynomial whose approach to zero marks a singular
    boundary; ``positivity`` lists expressions that must stay positive.
    ``bindings`` supplies values for metric parameters that are not chart
    coordinates.
    """

    metric: MetricField
    position: tuple
    velocity: tuple
    options: GeodesicOptions = GeodesicOptions()
    guard: Expr | None = None
    positivity: tuple = ()
    bindings: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        n = self.metric.dim
        object.__setattr__(self, "position", tuple(float(x) for x in self.position))
        object.__setattr__(self, "velocity", tuple(float(x) for x in self.velocity))
        if len(self.position) != n or len(self.velocity) != n:
            raise ValueError(f"initial state must have {n} components")
        if isinstance(self.guard, str):
            object.__setattr__(self, "guard", parse(self.guard))
        object.__setattr__(self, "positivity",
                           tuple(parse(p) if isinstance(p, str) else p for p in self.positivity))

    @property
    def parameter_values(self) -> tuple[float, ...]:
        missing = [p for p in self.metric.parameters if p not in self.bindings]
        if missing:
            raise InvalidInitialState(f"unbound metric parameters: {missing}")
        return tuple(float(self.bindings[p]) for p in self.metric.parameters)


@dataclass(frozen=True, eq=False)
class GeodesicTrajectory:
    tau: np.ndarray
    position: np.ndarray  # (k, n)
    velocity: np.ndarray  # (k, n)
    termination: Termination
    detail: dict
    accepted_steps: int
    rejected_steps: int

    @property
    def tau_end(self) -> float:
        return float(self.tau[-1])

    @property
    def endpoint(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.position[-1])

    def rows(self):
        """``(tau, E..., dE...)`` per sample."""
        for t, e, v in zip(self.tau, self.position, self.velocity):
            yield (float(t), *map(float, e), *map(float, v))


# ---------------------------------------------------------------------------
# right-hand side


class _Dynamics:
    """Compiled Christoffel symbols, guard and domain tests for one problem."""

    def __init__(self, problem: GeodesicProblem):
        g = problem.metric
        self.n = g.dim
        self.params = problem.parameter_values
        self.gamma = christoffel(g)
        self._gamma_fn = self.gamma._compiled
        args = g.arguments
        self._guard_fn = (compile_expressions([problem.guard], args, "guard")
                          if problem.guard is not None else None)
        self._positive_fn = (compile_expressions(list(problem.positivity), args, "domain")
                             if problem.positivity else None)
        self.max_coordinate = problem.options.max_coordinate

    def rhs(self, y: np.ndarray) -> np.ndarray:
        n = self.n
        vel = y[n:]
        G = np.array(self._gamma_fn(*y[:n], *self.params)).reshape(n, n, n)
        acc = -np.einsum("abc,b,c->a", G, vel, vel)
        out = np.empty_like(y)
        out[:n] = vel
        out[n:] = acc
        if not np.all(np.isfinite(out)):
            raise DomainError("non-finite geodesic acceleration", None, None)
        return out

    def guard(self, y: np.ndarray) -> float | None:
        if self._guard_fn is None:
            return None
        return self._guard_fn(*y[:self.n], *self.params)[0]

    def valid(self, y: np.ndarray) -> bool:
        if not np.all(np.isfinite(y)) or np.max(np.abs(y[:self.n])) > self.max_coordinate:
            return False
        if self._positive_fn is None:
            return True
        try:
            return all(v > 0 for v in self._positive_fn(*y[:self.n], *self.params))
        except DomainError:
            return False


def geodesic_rhs(metric: MetricField, state: Sequence[float],
                 bindings: Mapping[str, float] | None = None) -> np.ndarray:
    """``d(E, E')/dtau = (E', -Gamma^a_bc E'^b E'^c)`` at *state* = (E, E')."""
    n = metric.dim
    y = np.asarray(state, dtype=float)
    problem = GeodesicProblem(metric, y[:n], y[n:], bindings=bindings or {})
    return _Dynamics(problem).rhs(y)


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
# difference between 5th- and embedded 4th-order weights
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)

_SAFETY = 0.9
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0


def _dp_step(f, y, k1, h):
    """One DP5 step; returns (y_new, k7 = f(y_new), error estimate)."""
    ks = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
        ks.append(f(yi))
    y_new = y + h * sum(b * k for b, k in zip(_B, ks) if b)
    err = h * sum(e * k for e, k in zip(_E, ks) if e)
    return y_new, ks[6], err


def _initial_step(f, y, k1, rtol, atol, span):
    scale = atol + np.abs(y) * rtol
    d0 = np.sqrt(np.mean((y / scale) ** 2))
    d1 = np.sqrt(np.mean((k1 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    try:
        k2 = f(y + h0 * k1)
    except DomainError:
        return h0 * 1e-3
    d2 = np.sqrt(np.mean(((k2 - k1) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)


def integrate(problem: GeodesicProblem) -> GeodesicTrajectory:
    """Adaptive geodesic integration with singular-boundary detection.

    The guard stops integration once ``guard(E) / guard(E0)`` falls below
    ``options.guard_ratio``; the stopping parameter is then narrowed by
    bisection over the step length to ``options.refine_tol`` and the last
    sample on the regular side is kept.
    """
    opts = problem.options
    dyn = _Dynamics(problem)
    n = dyn.n
    y = np.array(problem.position + problem.velocity, dtype=float)
    if not dyn.valid(y):
        raise InvalidInitialState(f"initial point {problem.position} outside the domain")
    metric_at = problem.metric.numeric((*y[:n], *dyn.params))
    det = float(np.linalg.det(metric_at))
    if not np.isfinite(det) or abs(det) < 1e-13 * float(np.max(np.abs(metric_at))) ** n:
        raise InvalidInitialState(f"metric is singular at {problem.position}")
    guard0 = dyn.guard(y)
    if guard0 is not None and guard0 == 0:
        raise InvalidInitialState("initial point lies on the singular boundary")
    try:
        k1 = dyn.rhs(y)
    except DomainError as exc:
        raise InvalidInitialState(str(exc)) from None

    def guard_level(state):
        return dyn.guard(state) / guard0 - opts.guard_ratio

    taus, states = [0.0], [y.copy()]
    tau = 0.0
    h = opts.first_step or _initial_step(dyn.rhs, y, k1, opts.rtol, opts.atol, opts.tau_max)
    err_prev = 1e-4
    accepted = rejected = 0
    termination = Termination.MAX_STEPS
    detail: dict = {}

    while accepted < opts.max_steps:
        if tau >= opts.tau_max:
            termination = Termination.MAX_TAU
            break
        h = min(h, opts.tau_max - tau)
        if h < opts.min_step:
            termination = Termination.STEP_UNDERFLOW
            detail = {"step": h}
            break
        try:
            y_new, k7, err_vec = _dp_step(dyn.rhs, y, k1, h)
            scale = opts.atol + opts.rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
            if not math.isfinite(err):
                raise DomainError("non-finite error estimate", None, None)
        except (DomainError, FloatingPointError, OverflowError):
            rejected += 1
            h *= 0.25
            continue
        if err > 1.0:
            rejected += 1
            h /= min(1 / _FAC_MIN, (err ** _ALPHA) / _SAFETY)
            continue

        # accepted step
        if not dyn.valid(y_new):
            termination = Termination.DOMAIN_EXIT
            detail = {"tau": tau + h}
            break
        if guard0 is not None:
            level = guard_level(y_new)
            if level <= 0:
                tau_stop, y_stop = _refine_guard(dyn, guard_level, y, k1, tau, h, opts.refine_tol)
                if tau_stop > tau:
                    taus.append(tau_stop)
                    states.append(y_stop)
                termination = Termination.SINGULAR_BOUNDARY
                detail = {"denominator": dyn.guard(states[-1]),
                          "initial_denominator": guard0}
                accepted += 1
                break
        tau += h
        y, k1 = y_new, k7
        taus.append(tau)
        states.append(y.copy())
        accepted += 1
        fac = (err ** _ALPHA) / (err_prev ** _BETA) / _SAFETY if err > 0 else 1 / _FAC_MAX
        fac = min(1 / _FAC_MIN, max(1 / _FAC_MAX, fac))
        h /= fac
        err_prev = max(err, 1e-4)

    arr = np.array(states)
    return GeodesicTrajectory(np.array(taus), arr[:, :n].copy(), arr[:, n:].copy(),
                              termination, detail, accepted, rejected)


def _refine_guard(dyn, level, y, k1, tau, h, tol):
    """Largest step ``s <= h`` (to ``tol``) with the guard still positive."""
    lo, hi = 0.0, h
    y_lo = y
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        try:
            y_mid = _dp_step(dyn.rhs, y, k1, mid)[0]
            ok = dyn.valid(y_mid) and level(y_mid) > 0
        except (DomainError, FloatingPointError, OverflowError):
            ok = False
        if ok:
            lo, y_lo = mid, y_mid
        else:
            hi = mid
    return tau + lo, y_lo


def affine_norm(problem: GeodesicProblem, trajectory: GeodesicTrajectory) -> np.ndarray:
    """``g(E', E')`` at every sample."""
    g = problem.metric
    params = problem.parameter_values
    out = np.empty(len(trajectory.tau))
    for k, (e, v) in enumerate(zip(trajectory.position, trajectory.velocity)):
        out[k] = v @ g.numeric((*e, *params)) @ v
    return out


# ---------------------------------------------------------------------------
# van der Waals drivers


def vdw_problem(params: VdwParams, U0: float, V0: float, dU0: float = 0.0, dV0: float = 1.0,
                options: GeodesicOptions = GeodesicOptions(),
                metric: MetricField | None = None,
                enforce_domain: bool = True) -> GeodesicProblem:
    """Geodesic problem on the van der Waals metric with the boundary guard.

    With ``enforce_domain=False`` the rational metric is followed outside
    the chart of the entropy (``V <= b``); only finiteness is required.
    """
    g = metric if metric is not None else vdw_metric_closed(params)
    domain = ((params.bind(parse("V - b")), params.bind(parse("U + a/V")))
              if enforce_domain else ())
    return GeodesicProblem(g, (U0, V0), (dU0, dV0), options,
                           guard=boundary_polynomial_expr(params), positivity=domain)


INCOMPLETE = "incomplete-at-phase-boundary"
COMPLETE = "complete"
OTHER = "other-termination"
ENDPOINT_TOLERANCE = 1e-2


@dataclass(frozen=True)
class IncompletenessReport:
    U_max: float  # endpoint values
    V_max: float
    tau_max: float
    residual: float | None
    classification: str
    termination: Termination

    def as_dict(self) -> dict:
        return {"U_max": self.U_max, "V_max": self.V_max, "tau_max": self.tau_max,
                "residual": self.residual, "classification": self.classification,
                "termination": self.termination.value}


def incompleteness_report(trajectory: GeodesicTrajectory, params: VdwParams | None,
                          tolerance: float = ENDPOINT_TOLERANCE) -> IncompletenessReport:
    """Classify a trajectory by how it ended and by the boundary residual."""
    U, V = trajectory.endpoint[:2]
    residual = locus_residual(params, U, V) if params is not None else None
    term = trajectory.termination
    if term is Termination.SINGULAR_BOUNDARY and residual is not None and residual < tolerance:
        cls = INCOMPLETE
    elif term is Termination.MAX_TAU:
        cls = COMPLETE
    else:
        cls = OTHER
    return IncompletenessReport(U, V, trajectory.tau_end, residual, cls, term)


@dataclass(frozen=True)
class BatchItem:
    u0: float
    trajectory: GeodesicTrajectory | None
    report: IncompletenessReport | None
    error: str | None = None


def shoot_batch(template: GeodesicProblem, u0_values: Sequence[float],
                params: VdwParams | None = None, tolerance: float = ENDPOINT_TOLERANCE,
                workers: int | None = None) -> list[BatchItem]:
    """Integrate *template* once per first-coordinate start value.

    Results follow the order of *u0_values*; failures are recorded per item.
    """
    # warm shared caches before any concurrent access
    christoffel(template.metric)._compiled

    def one(u0: float) -> BatchItem:
        problem = replace(template, position=(float(u0), *template.position[1:]))
        try:
            traj = integrate(problem)
        except (InvalidInitialState, DomainError, ValueError) as exc:
            return BatchItem(float(u0), None, None, f"{type(exc).__name__}: {exc}")
        return BatchItem(float(u0), traj, incompleteness_report(traj, params, tolerance))

    if workers and workers > 1 and len(u0_values) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, u0_values))
    return [one(u) for u in u0_values]
