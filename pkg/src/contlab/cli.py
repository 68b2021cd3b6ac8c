"""Command-line entry point: scenario pipelines, one-off certificates, solves,
dual checks, duality gaps and viscous sweeps, all writing artifacts to disk."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .certify import certificate, corollary1_pair, sqrt_pair
from .dual import duality_gap, gradient_bound_check, solve_dual
from .fields import resolve_field
from .measures import Box, MeasurePath, SignedMeasure, bump
from .reporting import emit_report
from .scenarios import ScenarioConfigError, list_scenarios, run
from .transport import FlowConfig, solve
from .util import config_hash
from .viscous import FPGrid, selection_experiment

USAGE_EXIT = 2
UNWRITABLE_EXIT = 3


def _parse_ks(raw: str) -> list[int]:
    return [int(v) for v in raw.split(",") if v]


def _parse_interval(raw: str) -> tuple[float, float]:
    lo, hi = (float(v) for v in raw.split(","))
    return lo, hi


def _outdir(ns) -> Path:
    out = Path(ns.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError:
        print("error: output directory %s is not writable" % out, file=sys.stderr)
        raise SystemExit(UNWRITABLE_EXIT)
    return out


def _pairs_for_field(field_name: str, ks, interval):
    if field_name == "sqrt_abs":
        return [sqrt_pair(k, region=interval) for k in ks]
    b = resolve_field(field_name)
    return [corollary1_pair(b, k, interval) for k in ks]


def cmd_list(ns) -> int:
    for name, desc in list_scenarios():
        print("%-24s %s" % (name, desc))
    return 0


def cmd_scenario(ns) -> int:
    overrides = {}
    for item in ns.set or []:
        if "=" not in item:
            print("error: --set expects key=value", file=sys.stderr)
            return USAGE_EXIT
        key, val = item.split("=", 1)
        overrides[key] = val
    out = _outdir(ns)
    try:
        report = run(ns.name, overrides)
    except (KeyError, ScenarioConfigError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return USAGE_EXIT
    paths = emit_report(report, out)
    print(open(paths[1]).read(), end="")
    for p in paths:
        print("wrote %s" % p)
    return 0 if report.passed else 1


def cmd_certify(ns) -> int:
    out = _outdir(ns)
    path = MeasurePath.loads(Path(ns.path).read_text())
    interval = _parse_interval(ns.region)
    b = resolve_field(ns.field)
    pairs = _pairs_for_field(ns.field, _parse_ks(ns.ks), interval)
    cert = certificate(path, b, pairs, Box.interval(*interval), threshold=ns.threshold)
    payload = cert.to_json_dict()
    payload["recipe"] = pairs[0].recipe
    stem = out / ("certify-%s-%s" % (ns.field.replace(":", "_"),
                                     config_hash(payload["ks"])))
    Path(str(stem) + ".json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    with open(str(stem) + ".csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "J_k", "margin_i", "margin_ii"])
        for k in cert.ks:
            m = cert.margins[k]
            w.writerow([k, cert.J[k], m.growth, m.lyapunov])
    print("verdict: %s" % cert.verdict)
    for k in cert.ks:
        print("  k=%-8d J=%.6g" % (k, cert.J[k]))
    print("wrote %s.json and %s.csv" % (stem, stem))
    return 0


def cmd_solve(ns) -> int:
    out = _outdir(ns)
    nu = SignedMeasure.from_json_dict(json.loads(Path(ns.initial).read_text()))
    b = resolve_field(ns.field, d=nu.d)
    cfg = FlowConfig(ns.dt_ode, ns.T, ns.n_out)
    path = solve(b, nu, cfg)
    stem = out / ("solve-%s" % ns.field.replace(":", "_"))
    Path(str(stem) + ".path.json").write_text(path.dumps() + "\n")
    with open(str(stem) + ".atoms.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "atom_index", "x", "weight"])
        for t, s in zip(path.times, path.slices):
            for i, (loc, wt) in enumerate(s.atom_list()):
                w.writerow([t, i] + [float(c) for c in loc] + [wt])
    with open(str(stem) + ".density.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "node", "value"])
        for t, s in zip(path.times, path.slices):
            for p in s.pieces:
                for x, v in zip(p.grid, p.values):
                    w.writerow([t, x, v])
    masses = [s.mass() for s in path.slices]
    print("solved %s over [0, %g]: mass drift %.3g" %
          (ns.field, ns.T, max(abs(m - masses[0]) for m in masses)))
    print("wrote %s.path.json" % stem)
    return 0


def cmd_dual(ns) -> int:
    out = _outdir(ns)
    interval = _parse_interval(ns.region)
    pair = _pairs_for_field(ns.field, [ns.k], interval)[0]
    psi = bump(ns.psi_center, ns.psi_radius, ns.psi_amplitude)
    cfg = FlowConfig(ns.dt_ode, ns.s, max(int(ns.s / ns.dt_ode / 10), 1))
    dual = solve_dual(pair.b_k, psi, ns.s, cfg)
    rep = gradient_bound_check(dual, pair.V, pair.lyapunov_const,
                               Box.interval(*interval), n_x=ns.grid_n, n_t=9)
    stem = out / ("dual-%s-k%d" % (ns.field.replace(":", "_"), ns.k))
    grid = np.linspace(interval[0], interval[1], ns.grid_n)
    ts = np.linspace(0.0, ns.s, 9)
    with open(str(stem) + ".csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "t", "f", "grad_f_sq", "rhs_bound"])
        ratio = rep.sup_ratio
        for t in ts:
            for x in grid:
                f = dual.evaluate(float(x), float(t))
                gsq = dual.grad_sq(float(x), float(t))
                rhs = float(pair.V(float(x))) * np.exp(pair.lyapunov_const * (ns.s - t)) * ratio
                w.writerow([x, t, f, gsq, rhs])
    payload = {"field": ns.field, "k": ns.k, "s": ns.s,
               "support_radius": dual.support_radius,
               "gradient_margin": rep.margin,
               "max_principle_margin": rep.max_principle_margin,
               "support_margin": rep.support_margin}
    Path(str(stem) + ".json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print("gradient margin %.3g, max-principle margin %.3g, support margin %.3g"
          % (rep.margin, rep.max_principle_margin, rep.support_margin))
    print("wrote %s.csv" % stem)
    return 0


def cmd_gap(ns) -> int:
    out = _outdir(ns)
    path_a = MeasurePath.loads(Path(ns.path).read_text())
    if ns.path2:
        path_b = MeasurePath.loads(Path(ns.path2).read_text())
        diff = path_a - path_b
    else:
        diff = path_a
    psi = bump(ns.psi_center, ns.psi_radius, ns.psi_amplitude)
    b = resolve_field(ns.field)
    from .dual import support_radius_bound
    R = support_radius_bound(ns.s, psi.support_radius, 1.0)
    big = (-2.0 * R - 0.5, 2.0 * R + 0.5)
    reports = []
    for k in _parse_ks(ns.ks):
        pair = _pairs_for_field(ns.field, [k], big)[0]
        reports.append(duality_gap(psi, ns.s, diff, b, pair, Box.interval(*big)))
    stem = out / ("gap-%s" % ns.field.replace(":", "_"))
    Path(str(stem) + ".json").write_text(json.dumps(
        [g.to_json_dict() for g in reports], sort_keys=True, indent=2) + "\n")
    for g in reports:
        print("k=%-8d lhs=%.6g bound=%.6g C~=%.6g J_k=%.6g"
              % (g.k, g.lhs, g.bound, g.c_tilde, g.J_k))
    print("wrote %s.json" % stem)
    return 0


def cmd_viscous(ns) -> int:
    out = _outdir(ns)
    b = resolve_field(ns.field)
    lo, hi = _parse_interval(ns.domain)
    n = ns.grid_n
    dx = (hi - lo) / n
    xs = np.linspace(lo, hi, n + 1)
    max_b = float(np.max(np.abs(b.many(xs))))
    eps_schedule = [float(v) for v in ns.eps.split(",")]

    def factory(eps):
        dt = 0.45 * min(dx * dx / eps, dx / max_b)
        return FPGrid(lo, hi, n, dt, eps)

    result = selection_experiment(b, SignedMeasure.dirac(ns.x0), eps_schedule,
                                  factory, ns.T, n_out=ns.n_out)
    stem = out / ("viscous-%s" % ns.field.replace(":", "_"))
    with open(str(stem) + ".csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eps", "t", "median", "mass_near_zero", "distance_to_extreme"])
        for row in result.rows:
            for t, m, x in zip(result.times, row.medians, result.extreme):
                w.writerow([row.eps, t, m, row.mass_near_zero, abs(m - x)])
    payload = {"eps": [r.eps for r in result.rows],
               "terminal_distances": result.terminal_distances(),
               "near_zero_masses": result.near_zero_masses()}
    Path(str(stem) + ".json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    for r in result.rows:
        print("eps=%-8g terminal median=%.4f distance=%.4f mass_near_zero=%.3e"
              % (r.eps, r.terminal_median, r.terminal_distance, r.mass_near_zero))
    print("wrote %s.csv" % stem)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contlab",
        description="numerical laboratory for continuity equations with rough drift")
    sub = parser.add_subparsers(dest="command")

    sub.add_parser("list", help="list scenario catalog").set_defaults(fn=cmd_list)

    p = sub.add_parser("scenario", help="run a named scenario pipeline")
    p.add_argument("name")
    p.add_argument("--out", default="out")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(fn=cmd_scenario)

    p = sub.add_parser("certify", help="certificate for a measure path")
    p.add_argument("--field", required=True)
    p.add_argument("--path", required=True, help="MeasurePath JSON file")
    p.add_argument("--ks", default="10,100,1000,10000")
    p.add_argument("--region", default="-2,2")
    p.add_argument("--threshold", type=float, default=0.05)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("solve", help="solve the Cauchy problem by characteristics")
    p.add_argument("--field", required=True)
    p.add_argument("--initial", required=True, help="SignedMeasure JSON file")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt-ode", type=float, default=1e-3)
    p.add_argument("--n-out", type=int, default=100)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("dual", help="backward dual solve with bound checks")
    p.add_argument("--field", default="sqrt_abs")
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--psi-center", type=float, default=0.25)
    p.add_argument("--psi-radius", type=float, default=0.5)
    p.add_argument("--psi-amplitude", type=float, default=1.0)
    p.add_argument("--region", default="-2,2")
    p.add_argument("--grid-n", type=int, default=41)
    p.add_argument("--dt-ode", type=float, default=1e-3)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_dual)

    p = sub.add_parser("gap", help="duality-gap estimate for a (difference) path")
    p.add_argument("--field", default="sqrt_abs")
    p.add_argument("--path", required=True)
    p.add_argument("--path2", default=None)
    p.add_argument("--ks", default="10,100,1000,10000")
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--psi-center", type=float, default=0.25)
    p.add_argument("--psi-radius", type=float, default=0.5)
    p.add_argument("--psi-amplitude", type=float, default=1.0)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_gap)

    p = sub.add_parser("viscous", help="vanishing-viscosity selection sweep")
    p.add_argument("--field", default="sqrt_abs")
    p.add_argument("--eps", default="1e-2,3e-3,1e-3,3e-4")
    p.add_argument("--domain", default="-0.5,1.5")
    p.add_argument("--grid-n", type=int, default=4000)
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--n-out", type=int, default=50)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_viscous)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_EXIT if exc.code not in (0, None) else 0
    if not getattr(ns, "fn", None):
        parser.print_help()
        return USAGE_EXIT
    try:
        return ns.fn(ns)
    except SystemExit as exc:
        return int(exc.code)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return USAGE_EXIT


if __name__ == "__main__":
    sys.exit(main())
