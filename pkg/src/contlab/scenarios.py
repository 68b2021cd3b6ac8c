"""Named, reproducible scenario pipelines binding fields, initial data,
recipes and declarative expected observables."""
from __future__ import annotations

import importlib.resources as resources
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .certify import (certificate, check_conditions, corollary1_pair, corollary2_pair,
                      radial_pair, sqrt_pair)
from .dual import duality_gap, support_radius_bound
from .fields import BETA_PROFILES, FieldDecomposition, mirror, resolve_field
from .measures import (Box, MeasurePath, SignedMeasure, bump, pushforward,
                       random_test_function)
from .transport import (FlowConfig, MomentGateError, existence_sequence,
                        gronwall_check, solve_atomic, weak_residual)
from .util import config_hash, pmap
from .viscous import FPGrid, selection_experiment, upper_extreme_trajectory

CATALOG_ORDER = [
    "sharp_sqrt",
    "certified_pair_gap",
    "corollary2_demo",
    "radial_d2",
    "existence_moment_gate",
    "viscous_selection_sqrt",
    "mirror_negative_sqrt",
]

_ALLOWED_TOP_KEYS = {"name", "kind", "description", "params", "expected"}
_ALLOWED_EXPECTED_KEYS = {"name", "check", "target", "tol", "tol_key", "provenance"}


class ScenarioConfigError(ValueError):
    pass


def load_config(name: str) -> dict:
    base = resources.files("contlab").joinpath("scenario_configs")
    path = base.joinpath(name + ".json")
    if not path.is_file():
        raise KeyError("unknown scenario %r" % name)
    cfg = json.loads(path.read_text())
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    """Strict parsing: unknown keys anywhere in a config are rejected."""
    extra = set(cfg) - _ALLOWED_TOP_KEYS
    if extra:
        raise ScenarioConfigError("unknown config keys: %s" % sorted(extra))
    for need in ("name", "kind", "params", "expected"):
        if need not in cfg:
            raise ScenarioConfigError("config is missing %r" % need)
    if cfg["kind"] not in RUNNERS:
        raise ScenarioConfigError("unknown scenario kind %r" % cfg["kind"])
    allowed = RUNNERS[cfg["kind"]].param_keys
    extra = set(cfg["params"]) - allowed
    if extra:
        raise ScenarioConfigError("unknown parameter keys: %s" % sorted(extra))
    for obs in cfg["expected"]:
        bad = set(obs) - _ALLOWED_EXPECTED_KEYS
        if bad:
            raise ScenarioConfigError("unknown observable keys: %s" % sorted(bad))
        if obs.get("check") not in CHECKS:
            raise ScenarioConfigError("unknown check %r" % obs.get("check"))


def apply_overrides(cfg: dict, overrides: dict[str, str]) -> dict:
    """key=value overrides address existing params only (strict)."""
    out = json.loads(json.dumps(cfg))
    for key, raw in overrides.items():
        if key not in out["params"]:
            raise ScenarioConfigError("override targets unknown parameter %r" % key)
        old = out["params"][key]
        out["params"][key] = json.loads(raw) if isinstance(old, (list, dict, bool)) \
            else type(old)(json.loads(raw))
    validate_config(out)
    return out


def list_scenarios() -> list[tuple[str, str]]:
    """Stable catalog listing: (name, one-line description)."""
    out = []
    for name in CATALOG_ORDER:
        cfg = load_config(name)
        out.append((name, cfg["description"]))
    return out


# ---------------------------------------------------------------------------
# observable checks
# ---------------------------------------------------------------------------

def _chk_le(measured, target, tol):
    return float(measured) <= float(target) + tol


def _chk_ge(measured, target, tol):
    return float(measured) >= float(target) - tol


def _chk_eq(measured, target, tol):
    return abs(float(measured) - float(target)) <= tol


def _chk_is(measured, target, tol):
    return measured == target


def _chk_true(measured, target, tol):
    return bool(measured)


def _chk_strictly_decreasing(measured, target, tol):
    seq = list(measured)
    return all(a > b + 1e-12 for a, b in zip(seq, seq[1:]))


def _chk_nonincreasing(measured, target, tol):
    seq = list(measured)
    return all(a >= b - tol for a, b in zip(seq, seq[1:]))


CHECKS: dict[str, Callable] = {
    "le": _chk_le,
    "ge": _chk_ge,
    "eq": _chk_eq,
    "is": _chk_is,
    "is_true": _chk_true,
    "strictly_decreasing": _chk_strictly_decreasing,
    "nonincreasing": _chk_nonincreasing,
}


@dataclass
class ObservableResult:
    name: str
    check: str
    target: object
    tol: float
    provenance: str
    measured: object
    passed: bool

    def to_json_dict(self) -> dict:
        measured = self.measured
        if isinstance(measured, np.ndarray):
            measured = measured.tolist()
        return {"name": self.name, "check": self.check, "target": self.target,
                "tol": self.tol, "provenance": self.provenance,
                "measured": measured, "passed": self.passed}


@dataclass
class ScenarioReport:
    name: str
    kind: str
    config: dict
    config_hash: str
    observables: list[ObservableResult]
    blocks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.observables)

    def to_json_dict(self) -> dict:
        return {"scenario": self.name, "kind": self.kind,
                "config_hash": self.config_hash,
                "passed": self.passed,
                "observables": [o.to_json_dict() for o in self.observables],
                "blocks": _jsonable(self.blocks)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Runner:
    fn: Callable
    param_keys: frozenset


def _upper_extreme_path(b, times: np.ndarray) -> MeasurePath:
    xs = upper_extreme_trajectory(b, times)
    return MeasurePath(times, [SignedMeasure.dirac(float(x)) for x in xs])


def _run_sharp(params: dict) -> tuple[dict, dict]:
    b = resolve_field("sqrt_abs")
    T, n_out = params["T"], params["n_out"]
    cfg = FlowConfig(params["dt_ode"], T, n_out)
    region = Box.interval(*params["region"])
    ks = params["ks"]
    pairs = pmap(lambda k: sqrt_pair(k, region=tuple(params["region"])), ks)
    stationary = solve_atomic(b, SignedMeasure.dirac(0.0), cfg)
    moving = _upper_extreme_path(b, cfg.times)
    cert_m = certificate(moving, b, pairs, region, threshold=params["threshold"])
    cert_s = certificate(stationary, b, pairs, region, threshold=params["threshold"])

    psi = bump(**params["psi"])
    R = support_radius_bound(T, psi.support_radius, 1.0)
    big = Box.interval(-2.0 * R - 0.5, 2.0 * R + 0.5)
    gap_pairs = pmap(lambda k: sqrt_pair(k, region=(big.lo[0], big.hi[0])), ks)
    diff = moving - stationary
    gaps = [duality_gap(psi, T, diff, b, p, big) for p in gap_pairs]

    rng = np.random.default_rng(20240901)
    residuals = [abs(weak_residual(stationary, b, random_test_function(rng), T))
                 for _ in range(params["n_residual_checks"])]
    residuals += [abs(weak_residual(moving, b, random_test_function(rng), T))
                  for _ in range(params["n_residual_checks"])]

    j_m = [cert_m.J[k] for k in cert_m.ks]
    j_s = [cert_s.J[k] for k in cert_s.ks]
    measured = {
        "moving_verdict": cert_m.verdict,
        "moving_J": j_m,
        "moving_J_last": j_m[-1],
        "stationary_J_max_dev_from_1": max(abs(v - 1.0) for v in j_s),
        "stationary_verdict": cert_s.verdict,
        "stationary_boundary_mass": cert_s.boundary_mass,
        "gap_min_slack": min(g.bound - g.lhs for g in gaps),
        "gap_bound_last": gaps[-1].bound,
        "max_weak_residual": max(residuals),
    }
    blocks = {
        "ks": list(cert_m.ks),
        "J_moving": j_m,
        "J_stationary": j_s,
        "margins_moving": {str(k): [cert_m.margins[k].growth, cert_m.margins[k].lyapunov]
                           for k in cert_m.ks},
        "boundary_mass": {"moving": cert_m.boundary_mass, "stationary": cert_s.boundary_mass},
        "gap": [g.to_json_dict() for g in gaps],
        "residuals": residuals,
    }
    return measured, blocks


def _run_gap_certified(params: dict) -> tuple[dict, dict]:
    b = resolve_field("sqrt_abs")
    T = params["T"]
    cfg = FlowConfig(params["dt_ode"], T, params["n_out"])
    region = Box.interval(*params["region"])
    ks = params["ks"]
    pairs = pmap(lambda k: sqrt_pair(k, region=tuple(params["region"])), ks)
    nu = SignedMeasure.dirac(params["x0"])
    path_a = solve_atomic(b, nu, cfg)
    path_b = solve_atomic(sqrt_pair(params["smoothed_k"]).b_k, nu, cfg)
    cert_a = certificate(path_a, b, pairs, region, threshold=params["threshold"])
    cert_b = certificate(path_b, b, pairs, region, threshold=params["threshold"])
    psi = bump(**params["psi"])
    R = support_radius_bound(T, psi.support_radius, 1.0)
    big = Box.interval(-2.0 * R - 0.5, 2.0 * R + 0.5)
    gap_pairs = pmap(lambda k: sqrt_pair(k, region=(big.lo[0], big.hi[0])), ks)
    diff = path_a - path_b
    gaps = [duality_gap(psi, T, diff, b, p, big) for p in gap_pairs]
    measured = {
        "verdict_a": cert_a.verdict,
        "verdict_b": cert_b.verdict,
        "gap_min_slack": min(g.bound - g.lhs for g in gaps),
        "gap_bound_last": gaps[-1].bound,
        "gap_bounds": [g.bound for g in gaps],
    }
    blocks = {
        "ks": list(cert_a.ks),
        "J_a": [cert_a.J[k] for k in cert_a.ks],
        "J_b": [cert_b.J[k] for k in cert_b.ks],
        "gap": [g.to_json_dict() for g in gaps],
        "endpoint_a": float(path_a.slices[-1].atom_locs[0][0]),
        "endpoint_b": float(path_b.slices[-1].atom_locs[0][0]),
    }
    return measured, blocks


def _run_corollary2(params: dict) -> tuple[dict, dict]:
    dec = FieldDecomposition(
        lambda x: -np.minimum(np.asarray(x, dtype=float), 0.0),
        lambda x: np.maximum(np.asarray(x, dtype=float) - 1.0, 0.0),
        params["lipschitz_const"])
    interval = tuple(params["interval"])
    ks = params["ks"]
    pairs = pmap(lambda k: corollary2_pair(dec, k, interval), ks)
    lam = params["lipschitz_const"]
    xs = np.linspace(interval[0], interval[1], params["ratio_grid_n"])
    ratio_max = 0.0
    margins_min = math.inf
    for p in pairs:
        ratio = p.extras["ratio"]
        ratio_max = max(ratio_max, max(abs(float(ratio(float(x)))) for x in xs))
        m = check_conditions(p, n_x=101)
        margins_min = min(margins_min, m.growth, m.lyapunov)
    grid = params["limit_grid"]
    tol0 = params["limit_zero_tol"]
    devs_by_k = []
    for p in pairs:
        ft = p.extras["f_tilde"]
        devs = []
        for x in grid:
            target = 1.0 if abs(float(ft(float(x)))) <= tol0 else 0.0
            devs.append(abs(float(p.g(float(x))) - target))
        devs_by_k.append(max(devs))
    g_profiles = {str(p.k): [float(p.g(float(x))) for x in xs[::4]] for p in pairs}
    measured = {
        "ratio_max": ratio_max,
        "margins_min": margins_min,
        "limit_max_dev": devs_by_k[-1],
        "limit_devs_by_k": devs_by_k,
        "two_lambda_plus_one": 2.0 * (lam + 1.0),
    }
    blocks = {
        "ks": list(ks),
        "ratio_max": ratio_max,
        "limit_grid": list(grid),
        "limit_devs_by_k": devs_by_k,
        "g_profiles": {"x": xs[::4].tolist(), **g_profiles},
        "eps_k": [p.extras["eps_k"] for p in pairs],
    }
    return measured, blocks


def _run_radial(params: dict) -> tuple[dict, dict]:
    beta, lam = BETA_PROFILES[params["beta"]]
    d = params["d"]
    pair = radial_pair(beta, params["k"], params["N"], d, params["lam_n1"])
    cfg = FlowConfig(params["dt_ode"], params["T"], params["n_out"])
    nu = SignedMeasure.dirac(np.asarray(params["atom"], dtype=float))
    path = solve_atomic(pair.base, nu, cfg)
    end = path.slices[-1].atom_locs[0]
    expected = np.exp(-params["T"]) * np.asarray(params["atom"], dtype=float)
    m = check_conditions(pair, n_x=81)
    rng = np.random.default_rng(7)
    g_slack = math.inf
    for _ in range(200):
        x = rng.uniform(pair.region.lo, pair.region.hi)
        g_slack = min(g_slack, 2.0 * float(np.linalg.norm(x)) - float(pair.g(x)))
    measured = {
        "endpoint_error": float(np.linalg.norm(end - expected)),
        "transverse_drift": float(abs(end[1])) if d > 1 else 0.0,
        "margins_min": min(m.growth, m.lyapunov),
        "g_bound_slack": g_slack,
    }
    trajectory = [[float(t)] + [float(c) for c in s.atom_locs[0]]
                  for t, s in zip(path.times, path.slices)]
    blocks = {"trajectory": trajectory, "expected_endpoint": expected.tolist(),
              "recipe": pair.recipe}
    return measured, blocks


def _run_existence(params: dict) -> tuple[dict, dict]:
    b = resolve_field("sqrt_abs")
    region = Box.interval(*params["region"])
    cfg = FlowConfig(params["dt_ode"], params["T"], params["n_out"])
    ks = params["ks"]
    pairs = [sqrt_pair(k, region=tuple(params["region"])) for k in ks]
    run = existence_sequence(b, pairs, SignedMeasure.dirac(params["x0"]), cfg, region)
    rep_le = gronwall_check(run, pairs, c3=params["c3"], c1=params["compat_c1"],
                            c2=params["compat_c2"], compare="k<=m")
    rep_gt = gronwall_check(run, pairs, c3=params["c3"], c1=params["compat_c1"],
                            c2=params["compat_c2"], compare="k>m")
    init = [run.initial_moments[k] for k in run.ks]
    gate_triggered = False
    try:
        existence_sequence(b, pairs, SignedMeasure.dirac(0.0), cfg, region)
    except MomentGateError:
        gate_triggered = True
    measured = {
        "gate_passed": True,
        "moments_bounded": max(init) <= 10.0 * max(min(init), 1e-300),
        "gronwall_min_slack": rep_le.min_slack(),
        "compat_margin_le": rep_le.min_compat(),
        "compat_margin_gt": rep_gt.min_compat(),
        "distances_shrink": all(run.cauchy_flags()),
        "mass_drift_max": max(run.mass_drift.values()),
        "zero_start_gate_triggered": gate_triggered,
    }
    blocks = {
        "ks": list(run.ks),
        "initial_moments": init,
        "moments": {str(k): run.moments[k].tolist() for k in run.ks},
        "distance_times": run.distance_times.tolist(),
        "distances": run.distances.tolist(),
        "times": run.candidate.times.tolist(),
    }
    return measured, blocks


def _run_viscous(params: dict) -> tuple[dict, dict]:
    b = resolve_field("sqrt_abs")
    a, bb = params["domain"]
    n = params["grid_n"]
    dx = (bb - a) / n
    xs = np.linspace(a, bb, n + 1)
    max_b = float(np.max(np.abs(b.many(xs))))
    safety = params["cfl_safety"]

    def grid_factory(eps: float) -> FPGrid:
        dt = safety * 0.5 * min(dx * dx / eps, dx / max_b)
        return FPGrid(a, bb, n, dt, eps)

    result = selection_experiment(b, SignedMeasure.dirac(params["x0"]),
                                  params["eps_schedule"], grid_factory, params["T"],
                                  n_out=params["n_out"])
    dists = result.terminal_distances()
    masses = result.near_zero_masses()
    tail = masses[-3:]
    mass_trend = masses[-1] < masses[0] and all(x > y for x, y in zip(tail, tail[1:]))
    measured = {
        "terminal_distances": dists,
        "terminal_distance_last": dists[-1],
        "near_zero_mass_trend": mass_trend,
        "near_zero_masses": masses,
        "min_value": min(r.min_value for r in result.rows),
        "mass_drift_max": max(r.mass_drift for r in result.rows),
        "grid_noise": 1.5 * dx,
    }
    blocks = {
        "eps": [r.eps for r in result.rows],
        "times": result.times.tolist(),
        "extreme": result.extreme.tolist(),
        "medians": {("%g" % r.eps): r.medians.tolist() for r in result.rows},
        "terminal_distances": dists,
        "near_zero_masses": masses,
        "sup_distances": [r.sup_distance for r in result.rows],
        "dx": dx,
    }
    return measured, blocks


def _run_mirror(params: dict) -> tuple[dict, dict]:
    b_neg = mirror(resolve_field("sqrt_abs"))           # -sqrt(|x|)
    b_pos = mirror(b_neg)                                # back to sqrt(|x|)
    interval = tuple(params["interval"])
    xs = np.linspace(interval[0], interval[1], 101)
    invol = float(np.max(np.abs(np.asarray(b_pos(xs)) -
                                np.asarray(resolve_field("sqrt_abs")(xs)))))
    cfg = FlowConfig(params["dt_ode"], params["T"], params["n_out"])
    ks = params["ks"]
    pairs = pmap(lambda k: corollary1_pair(b_pos, k, interval), ks)
    # paths of the nonpositive problem, reflected into the mirrored frame
    stationary = solve_atomic(b_neg, SignedMeasure.dirac(0.0), cfg)
    moving_neg = MeasurePath(cfg.times, [
        pushforward(s, lambda x: -x)
        for s in _upper_extreme_path(b_pos, cfg.times).slices])
    reflect = lambda path: MeasurePath(path.times,
                                       [pushforward(s, lambda x: -x) for s in path.slices])
    region = Box.interval(*interval)
    cert_m = certificate(reflect(moving_neg), b_pos, pairs, region,
                         threshold=params["threshold"])
    cert_s = certificate(reflect(stationary), b_pos, pairs, region,
                         threshold=params["threshold"])
    g_max = 0.0
    for p in pairs:
        g_max = max(g_max, max(float(p.g(float(x))) for x in xs[::2]))
    measured = {
        "involution_error": invol,
        "moving_verdict": cert_m.verdict,
        "moving_J": [cert_m.J[k] for k in cert_m.ks],
        "stationary_verdict": cert_s.verdict,
        "recipe_g_max": g_max,
    }
    blocks = {
        "ks": list(cert_m.ks),
        "J_moving": [cert_m.J[k] for k in cert_m.ks],
        "J_stationary": [cert_s.J[k] for k in cert_s.ks],
    }
    return measured, blocks


RUNNERS: dict[str, Runner] = {
    "sharp": Runner(_run_sharp, frozenset({
        "T", "n_out", "dt_ode", "ks", "region", "threshold", "psi", "n_residual_checks"})),
    "gap_certified": Runner(_run_gap_certified, frozenset({
        "T", "n_out", "dt_ode", "ks", "x0", "smoothed_k", "region", "threshold", "psi"})),
    "corollary2": Runner(_run_corollary2, frozenset({
        "interval", "ks", "lipschitz_const", "ratio_grid_n", "limit_grid", "limit_zero_tol"})),
    "radial": Runner(_run_radial, frozenset({
        "beta", "d", "N", "k", "lam_n1", "T", "dt_ode", "n_out", "atom"})),
    "existence": Runner(_run_existence, frozenset({
        "T", "n_out", "dt_ode", "ks", "x0", "region", "c3", "compat_c1", "compat_c2"})),
    "viscous": Runner(_run_viscous, frozenset({
        "T", "eps_schedule", "domain", "grid_n", "cfl_safety", "n_out", "x0",
        "terminal_target"})),
    "mirror": Runner(_run_mirror, frozenset({
        "T", "n_out", "dt_ode", "ks", "interval", "threshold"})),
}


def run(name_or_config: str | dict, overrides: dict[str, str] | None = None) -> ScenarioReport:
    """Execute a scenario pipeline and compare its declared observables."""
    cfg = load_config(name_or_config) if isinstance(name_or_config, str) else name_or_config
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    else:
        validate_config(cfg)
    measured, blocks = RUNNERS[cfg["kind"]].fn(cfg["params"])
    observables = []
    for spec in cfg["expected"]:
        name = spec["name"]
        if name not in measured:
            raise ScenarioConfigError("observable %r is not produced by kind %r"
                                      % (name, cfg["kind"]))
        tol = spec.get("tol", 0.0)
        if "tol_key" in spec:
            tol = float(measured[spec["tol_key"]])
        check = CHECKS[spec["check"]]
        passed = bool(check(measured[name], spec.get("target"), tol))
        observables.append(ObservableResult(name, spec["check"], spec.get("target"),
                                            tol, spec.get("provenance", ""),
                                            measured[name], passed))
    return ScenarioReport(cfg["name"], cfg["kind"], cfg, config_hash(cfg),
                          observables, blocks)
