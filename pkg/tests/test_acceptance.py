"""Acceptance criteria, one test each.

Every test states its criterion in the first docstring line; the terminal
summary prints one PASS/FAIL line per criterion.
"""
import math
import time

import numpy as np
import pytest

from geothermo.cli import run
from geothermo.contact import induce_metric, legendre_invariance_check
from geothermo.geodesic import (INCOMPLETE, GeodesicOptions, GeodesicProblem, Termination,
                                affine_norm, integrate, shoot_batch, vdw_problem)
from geothermo.geometry import MetricField, christoffel, riemann, scalar_curvature_at
from geothermo.vdw import (VdwParams, denominator_factor_check, in_domain, locus_residual,
                           phase_boundary_energy, singular_locus, vdw_metric_closed, vdw_system)
from oracles import (christoffel_fd, curvature_fd, euclidean_metric, ideal_gas_metric_hand,
                     sphere_metric_z, vdw_metric_hand)


class Clock:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def test_ideal_gas_flatness():
    """Ideal gas is flat: |R| < 1e-9 on a 20x20 grid over [0.5, 5]^2 (< 10 s)"""
    with Clock() as clock:
        g = vdw_metric_closed(VdwParams(0, 0, 1))
        grid = np.linspace(0.5, 5, 20)
        worst = max(abs(scalar_curvature_at(g, (U, V))) for U in grid for V in grid)
    assert worst < 1e-9
    assert clock.elapsed < 10


def test_pipeline_matches_transcription():
    """Pulled-back metric equals the closed form at 100 random points, rel 1e-10 (< 30 s)"""
    params = VdwParams(1, 1, 1)
    rng = np.random.default_rng(2024)
    with Clock() as clock:
        g = induce_metric(vdw_system(params))
        closed = vdw_metric_closed(params)
        worst = 0.0
        for _ in range(100):
            V = rng.uniform(1.05, 10)
            U = rng.uniform(-1 / V + 0.01, 10)
            a, b = g.numeric((U, V)), closed.numeric((U, V))
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))))
    assert worst < 1e-10
    assert clock.elapsed < 30


def test_denominator_identities():
    """Both denominator factorizations hold at 1000 random points, rel 1e-12 (< 30 s)"""
    rng = np.random.default_rng(7)
    choices = [0, 0.05, 1]
    worst = 0.0
    with Clock() as clock:
        for _ in range(1000):
            params = VdwParams(rng.choice(choices), rng.choice(choices))
            V = params.b + rng.uniform(0.01, 10)
            U = rng.uniform(-params.a / V + 1e-3, 10)
            assert in_domain(params, U, V)
            l1, r1, l2, r2 = denominator_factor_check(params, (U, V))
            for lhs, rhs in ((l1, r1), (l2, r2)):
                worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    assert worst < 1e-12
    assert clock.elapsed < 30


def test_critical_point_root():
    """Double root V = 3 at the critical pressure; no roots at P = 0.75 (< 1 s)"""
    params = VdwParams(1, 1)
    with Clock() as clock:
        critical = singular_locus(params.a / (27 * params.b ** 2), params)
        high = singular_locus(0.75, params)
    assert len(critical.roots) == 1
    assert critical.roots[0].V == pytest.approx(3, abs=1e-6)
    assert critical.roots[0].residual < 1e-10
    assert [r for r in high.roots if r.V > params.b] == []
    assert clock.elapsed < 1


def test_curvature_diverges_at_phase_boundary():
    """|R| passes 1e6 approaching the phase boundary at V = 3, rising monotonically (< 10 s)"""
    params = VdwParams(1, 1, 1)
    with Clock() as clock:
        g = vdw_metric_closed(params)
        curv = riemann(g)
        U_end = phase_boundary_energy(3.0, params)
        # geometric approach toward the endpoint, which itself is never sampled
        gaps = [10.0 ** (-k / 4) for k in range(41)]
        R = [abs(curv.scalar_value((U_end + d, 3.0))) for d in gaps]
    assert max(R) > 1e6
    tail = R[-10:]
    assert all(b > a for a, b in zip(tail, tail[1:]))
    assert clock.elapsed < 10


SUITE = [
    ("flat", lambda: MetricField.diagonal(("x", "y"), [1, 1]), euclidean_metric,
     [(-5, 5), (-5, 5)]),
    ("sphere", lambda: MetricField.diagonal(("z", "phi"), ["1/(1 - z^2)", "1 - z^2"]),
     sphere_metric_z, [(-0.9, 0.9), (0, 6)]),
    ("ideal", lambda: vdw_metric_closed(VdwParams(0, 0, 1)), ideal_gas_metric_hand,
     [(0.2, 5), (0.2, 5)]),
    ("vdw", lambda: vdw_metric_closed(VdwParams(1, 1, 1)),
     lambda x: vdw_metric_hand(x[0], x[1], 1, 1, 1), [(0.5, 5), (1.5, 6)]),
]


def test_finite_difference_oracle():
    """Christoffel symbols and R match finite differences at 50 points per metric, rel 1e-4 (< 60 s)"""
    rng = np.random.default_rng(99)
    failures = []
    with Clock() as clock:
        for name, make, hand, box in SUITE:
            g = make()
            gamma, curv = christoffel(g), riemann(g)
            lo, hi = np.array(box).T
            for _ in range(50):
                p = tuple(lo + (hi - lo) * rng.random(2))
                G, Gfd = gamma.numeric(p), christoffel_fd(hand, p)
                scale = max(float(np.abs(Gfd).max()), 1e-12)
                if np.abs(G - Gfd).max() > 1e-4 * scale + 1e-12:
                    failures.append((name, p, "christoffel"))
                R, Rfd = curv.scalar_value(p), curvature_fd(hand, p)[2]
                if abs(R - Rfd) > 1e-4 * abs(Rfd) + 1e-9:
                    failures.append((name, p, "scalar"))
    assert failures == []
    assert clock.elapsed < 60


def test_legendre_invariance_verdicts():
    """First-order metric passes the Legendre check; Hessian and flat metrics fail (< 10 s)"""
    with Clock() as clock:
        gtd = legendre_invariance_check("gtd-first-order", n=2, trials=100)
        hess = legendre_invariance_check("hessian", n=2, trials=100)
        flat = legendre_invariance_check("flat", n=2, trials=100)
    assert gtd.verdict == "PASS" and gtd.max_deviation < 1e-9
    assert hess.verdict == "FAIL" and hess.max_deviation > 1e-3
    assert flat.verdict == "FAIL" and flat.max_deviation > 1e-3
    assert clock.elapsed < 10


def test_geodesic_incompleteness():
    """15 geodesics (a=1, b=0.05, V0=0.1) all stop at the phase boundary, residual < 1e-2 (< 5 min)"""
    params = VdwParams(1, 0.05, 1)
    with Clock() as clock:
        template = vdw_problem(params, 0.0, 0.1, 0.0, 1.0)
        items = shoot_batch(template, [10.0 * k for k in range(15)], params, tolerance=1e-2)
    rows = []
    for item in items:
        if item.error is not None:
            rows.append((item.u0, item.error, math.nan, False))
            continue
        U, V = item.trajectory.endpoint
        residual = locus_residual(params, U, V)
        ok = item.report.termination is Termination.SINGULAR_BOUNDARY and residual < 1e-2
        assert ok == (item.report.classification == INCOMPLETE)
        rows.append((item.u0, item.report.termination.value, residual, ok))
    table = "; ".join(f"U0={u:g}: {t}, residual {r:.3g}" for u, t, r, _ in rows)
    assert clock.elapsed < 300
    assert len(rows) == 15
    assert all(ok for *_, ok in rows), table


def test_integrator_sanity():
    """Flat geodesics are straight, affine norm drifts < 1e-6, the sphere equator closes (< 30 s)"""
    euclid = MetricField.diagonal(("x", "y"), [1, 1])
    sphere = MetricField.diagonal(("z", "phi"), ["1/(1 - z^2)", "1 - z^2"])
    with Clock() as clock:
        problems = []
        rng = np.random.default_rng(5)
        straight = []
        for _ in range(10):
            x0, v0 = rng.uniform(-5, 5, 2), rng.uniform(-5, 5, 2)
            p = GeodesicProblem(euclid, x0, v0, GeodesicOptions(tau_max=1.0))
            traj = integrate(p)
            straight.append(np.abs(np.array(traj.endpoint) - (x0 + v0)).max())
            problems.append((p, traj))
        equator = GeodesicProblem(sphere, (0.0, 0.0), (0.0, 1.0),
                                  GeodesicOptions(tau_max=2 * math.pi))
        eq = integrate(equator)
        problems.append((equator, eq))
        tilted = GeodesicProblem(sphere, (0.0, 0.0), (0.6, 0.8),
                                 GeodesicOptions(tau_max=2 * math.pi))
        problems.append((tilted, integrate(tilted)))
        for U0, V0, dU, dV in [(2.0, 3.0, 0.0, 1.0), (1.0, 5.0, 0.5, -0.5), (4.0, 2.0, -1.0, 0.2)]:
            p = vdw_problem(VdwParams(1, 1, 1), U0, V0, dU, dV, GeodesicOptions(tau_max=2.0))
            problems.append((p, integrate(p)))
        drifts = []
        for p, traj in problems:
            n = affine_norm(p, traj)
            drifts.append(float(np.max(np.abs(n - n[0])) / abs(n[0])))
    assert max(straight) < 1e-9
    assert max(drifts) < 1e-6
    assert np.abs(np.array(eq.endpoint) - [0.0, 2 * math.pi]).max() < 1e-5
    assert clock.elapsed < 30


def test_cli_reproducibility(tmp_path):
    """Two geodesics runs with one config give byte-identical CSV and JSON (repeat < 2x first)"""
    args = ["geodesics", "--a", "1", "--b", "0.05", "--v0", "0.1", "--u0-range", "0:140:15",
            "--format", "csv", "--format", "json"]
    with Clock() as first:
        run(args + ["--out", str(tmp_path / "a")])
    with Clock() as second:
        run(args + ["--out", str(tmp_path / "b")])
    files = sorted(p.name for p in (tmp_path / "a").iterdir() if p.suffix in (".csv", ".json")
                   and p.name != "manifest.json")
    assert len(files) == 16
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert second.elapsed < 2 * first.elapsed
