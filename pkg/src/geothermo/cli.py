"""Command-line drivers: curvature grids, geodesic sweeps, locus roots, Legendre verdicts.

Every run writes its outputs plus ``manifest.json`` (resolved configuration,
duration, sha256 of each output) into ``--out``.  Options come from a JSON
config file (``--config``) and are overridden by flags.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .contact import METRIC_KINDS, FundamentalSystem, induce_metric, legendre_invariance_check
from .geodesic import (ENDPOINT_TOLERANCE, GeodesicOptions, GeodesicProblem, shoot_batch,
                       vdw_problem)
from .geometry import MetricField, SingularProximityError, riemann, scalar_curvature_at
from .svg import line_plot
from .symexpr import DomainError, ParseError
from .vdw import VdwParams, in_domain, phase_boundary_energy, singular_locus, vdw_metric_closed

COMMANDS = ("curvature", "geodesics", "locus", "legendre")
DEFAULT_FORMATS = {"curvature": ["csv", "json"], "geodesics": ["csv", "json"],
                   "locus": ["json"], "legendre": ["json"]}
DEFAULTS: dict[str, Any] = {
    "a": 1.0, "b": 1.0, "lambda": 1.0, "out": "out", "system": "vdw",
    "potential": None, "coordinates": ["U", "V"],
    # curvature
    "u_range": "0.5:5:20", "v_range": "1.5:6:20",
    # geodesics
    "v0": 0.1, "du0": 0.0, "dv0": 1.0, "u0_range": "0:140:15", "u0_values": None,
    "rtol": 1e-8, "atol": 1e-10, "tau_max": 100.0, "tolerance": ENDPOINT_TOLERANCE,
    "workers": 1, "relax_domain": False,
    # locus
    "pressure": None,
    # legendre
    "metric": "gtd-first-order", "n": 2, "trials": 100, "seed": 0,
}


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def parse_range(text: str) -> list[float]:
    """``lo:hi:n`` -> n evenly spaced values (n = 1 gives [lo])."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigError(f"range {text!r} must look like lo:hi:n") from None
    if n < 0:
        raise ConfigError(f"range {text!r} has a negative count")
    if n == 1:
        return [lo]
    return [float(x) for x in np.linspace(lo, hi, n)]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geothermo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"geothermo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path)
        p.add_argument("--out")
        p.add_argument("--a", type=float)
        p.add_argument("--b", type=float)
        p.add_argument("--lambda", dest="lambda_", type=float)
        p.add_argument("--format", action="append", choices=("csv", "json", "svg"))
        if name in ("curvature", "geodesics"):
            p.add_argument("--system", choices=("vdw", "custom", "flat"))
            p.add_argument("--potential", help="fundamental equation for --system custom")
        if name == "curvature":
            p.add_argument("--u-range")
            p.add_argument("--v-range")
        if name == "geodesics":
            p.add_argument("--v0", type=float)
            p.add_argument("--du0", type=float)
            p.add_argument("--dv0", type=float)
            p.add_argument("--u0-range")
            p.add_argument("--rtol", type=float)
            p.add_argument("--atol", type=float)
            p.add_argument("--tau-max", type=float)
            p.add_argument("--tolerance", type=float)
            p.add_argument("--workers", type=int)
            p.add_argument("--relax-domain", action="store_true", default=None,
                           help="follow the rational metric beyond V <= b")
        if name == "locus":
            p.add_argument("--pressure", type=float)
        if name == "legendre":
            p.add_argument("--metric", choices=METRIC_KINDS)
            p.add_argument("--n", type=int)
            p.add_argument("--trials", type=int)
            p.add_argument("--seed", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    config = dict(DEFAULTS)
    config["format"] = list(DEFAULT_FORMATS[args.command])
    if args.config is not None:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(loaded) - set(config)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config.update(loaded)
        # an explicit sweep list in the file replaces the default range
        if "u0_values" in loaded and "u0_range" not in loaded:
            config["u0_range"] = None
    for key, value in vars(args).items():
        if key in ("command", "config") or value is None:
            continue
        key = "lambda" if key == "lambda_" else key
        config[key] = value
        if key == "u0_range":
            config["u0_values"] = None
    if isinstance(config["format"], str):
        config["format"] = [config["format"]]
    config["format"] = sorted(set(config["format"]))
    config["command"] = args.command
    return config


def vdw_params(config: dict) -> VdwParams:
    try:
        return VdwParams(config["a"], config["b"], config["lambda"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# output helpers


def fmt(x: float) -> str:
    """Shortest round-trip text for a double."""
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


class Outputs:
    def __init__(self, directory: Path):
        self.directory = directory
        self.files: dict[str, str] = {}

    def write(self, name: str, text: str):
        path = self.directory / name
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            path.write_bytes(text.encode("utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot write {path}: {exc}") from None
        self.files[name] = hashlib.sha256(text.encode("utf-8")).hexdigest()

    def json(self, name: str, payload):
        self.write(name, json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")

    def manifest(self, config: dict, duration: float):
        self.json("manifest.json", {
            "tool": "geothermo", "version": __version__, "config": config,
            "duration_seconds": duration,
            "outputs": {k: v for k, v in sorted(self.files.items())},
        })


def _finite_or_none(x):
    return x if x is not None and math.isfinite(x) else None


def _csv(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# metrics by system


def _system_metric(config: dict) -> tuple[MetricField, VdwParams | None]:
    system = config["system"]
    if system == "vdw":
        params = vdw_params(config)
        return vdw_metric_closed(params), params
    if system == "flat":
        return MetricField.diagonal(tuple(config["coordinates"]), [1, 1]), None
    if system == "custom":
        if not config.get("potential"):
            raise ConfigError("--system custom needs --potential")
        try:
            fs = FundamentalSystem(tuple(config["coordinates"]), config["potential"], "Phi",
                                   {k: config[k] for k in ("a", "b") if k in config})
            return induce_metric(fs), None
        except (ParseError, ValueError) as exc:
            raise ConfigError(f"invalid custom system: {exc}") from None
    raise ConfigError(f"unknown system {system!r}")


# ---------------------------------------------------------------------------
# commands


def cmd_curvature(config: dict, out: Outputs) -> int:
    """Scalar curvature on a rectangular grid, flagging near-singular cells."""
    g, params = _system_metric(config)
    us, vs = parse_range(config["u_range"]), parse_range(config["v_range"])
    if params is not None:
        bad = [(u, v) for u in us for v in vs if not in_domain(params, u, v)]
        if bad:
            raise ConfigError(f"grid leaves the domain V > b, U + a/V > 0 at {bad[0]}")
    coords = g.chart.coordinates
    curv = riemann(g)
    du = (us[1] - us[0]) / 2 if len(us) > 1 else 0.0
    dv = (vs[1] - vs[0]) / 2 if len(vs) > 1 else 0.0

    def straddles(u, v) -> bool:
        probes = [(u, v), (u - du, v), (u + du, v), (u, v - dv), (u, v + dv)]
        values = [curv.factor_values(dict(zip(coords, p))) for p in probes]
        for k in range(len(values[0])):
            signs = {math.copysign(1, vals[k]) for vals in values if vals[k] != 0}
            if len(signs) > 1 or any(vals[k] == 0 for vals in values[:1]):
                return True
        return False

    rows, flagged, magnitudes = [], [], []
    for v in vs:
        for u in us:
            point = dict(zip(coords, (u, v)))
            try:
                R = scalar_curvature_at(g, point)
                if straddles(u, v):
                    R = math.inf
            except (SingularProximityError, DomainError):
                R = math.inf
            if math.isinf(R):
                flagged.append((u, v))
            else:
                magnitudes.append(abs(R))
            rows.append((u, v, R))
    summary = {
        "cells": len(rows),
        "flagged": len(flagged),
        "flagged_cells": [[u, v] for u, v in flagged],
        "min_abs_R": min(magnitudes) if magnitudes else None,
        "max_abs_R": max(magnitudes) if magnitudes else None,
        "coordinates": list(coords),
    }
    if "csv" in config["format"]:
        out.write("curvature.csv", _csv((*coords, "R"), rows))
    if "json" in config["format"]:
        out.json("curvature.json", summary)
    if "svg" in config["format"]:
        curve = []
        if params is not None and params.a > 0:
            curve = [[(v, phase_boundary_energy(v, params)) for v in
                      np.linspace(min(vs), max(vs), 200) if v > params.b]]
        out.write("curvature.svg", line_plot(curve, coords[1], coords[0],
                                             "flagged cells and singular boundary",
                                             markers=[(v, u) for u, v in flagged]))
    return 0


def _sweep(config: dict) -> list[float]:
    if config.get("u0_values") is not None:
        return [float(u) for u in config["u0_values"]]
    if config.get("u0_range") is None:
        return []
    return parse_range(config["u0_range"])


def cmd_geodesics(config: dict, out: Outputs) -> int:
    """Shoot one geodesic per U(0); write trajectories, reports and a plot."""
    g, params = _system_metric(config)
    try:
        options = GeodesicOptions(rtol=config["rtol"], atol=config["atol"],
                                  tau_max=config["tau_max"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    u0s = _sweep(config)
    start = (0.0, config["v0"])
    velocity = (config["du0"], config["dv0"])
    if params is not None:
        template = vdw_problem(params, *start, *velocity, options, metric=g,
                               enforce_domain=not config["relax_domain"])
    else:
        template = GeodesicProblem(g, start, velocity, options)
    items = shoot_batch(template, u0s, params, config["tolerance"], config["workers"])
    coords = g.chart.coordinates
    header = ("tau", *coords, *(f"d{c}" for c in coords))
    reports = []
    failures = 0
    for i, item in enumerate(items):
        entry = {"index": i, "u0": item.u0}
        if item.error is not None:
            failures += 1
            entry["error"] = item.error
        else:
            rep = item.report.as_dict()
            rep["residual"] = _finite_or_none(rep["residual"])
            entry.update(rep)
            entry["samples"] = len(item.trajectory.tau)
            if "csv" in config["format"]:
                out.write(f"geodesics_{i:03d}.csv", _csv(header, item.trajectory.rows()))
        reports.append(entry)
    if "json" in config["format"]:
        out.json("geodesics.json", reports)
    if "svg" in config["format"]:
        series = [[(float(e[1]), float(e[0])) for e in item.trajectory.position]
                  for item in items if item.trajectory is not None]
        labels = [f"{coords[0]}0={item.u0:g}" for item in items if item.trajectory is not None]
        out.write("geodesics.svg", line_plot(series, coords[1], coords[0], "geodesics", labels))
    return 1 if failures else 0


def cmd_locus(config: dict, out: Outputs) -> int:
    """Roots of the phase-transition cubic at one pressure."""
    params = vdw_params(config)
    P = config["pressure"]
    if P is None:
        if params.b <= 0:
            raise ConfigError("--pressure is required when b = 0")
        P = params.a / (27 * params.b ** 2)
    try:
        report = singular_locus(float(P), params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out.json("locus.json", report.as_dict())
    return 0


def cmd_legendre(config: dict, out: Outputs) -> int:
    """Legendre-invariance verdict for one phase-manifold metric."""
    if config["metric"] not in METRIC_KINDS:
        raise ConfigError(f"metric must be one of {METRIC_KINDS}")
    try:
        report = legendre_invariance_check(config["metric"], int(config["n"]),
                                           int(config["trials"]), int(config["seed"]),
                                           config["lambda"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out.json("legendre.json", report.as_dict())
    return 0


HANDLERS = {"curvature": cmd_curvature, "geodesics": cmd_geodesics,
            "locus": cmd_locus, "legendre": cmd_legendre}


def run(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        config = resolve_config(args)
        out = Outputs(Path(config["out"]))
        code = HANDLERS[args.command](config, out)
    except ConfigError as exc:
        print(f"geothermo {args.command}: error: {exc}", file=sys.stderr)
        return 2
    out.manifest(config, time.perf_counter() - started)
    for name in sorted(out.files):
        print(out.directory / name)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
