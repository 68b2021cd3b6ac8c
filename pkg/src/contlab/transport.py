"""Characteristic solvers for the transport Cauchy problem, the weak-form
residual and the approximation-sequence existence construction."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .certify import ApproximationPair
from .fields import VectorField
from .measures import (Box, DensityPiece, MeasurePath, SignedMeasure, TestFunction,
                       bl_distance, integrate)


@dataclass(frozen=True)
class FlowConfig:
    """Fixed-step RK4 configuration; dt_ode must divide the output spacing."""

    dt_ode: float = 1e-3
    horizon: float = 1.0
    n_out: int = 100

    def __post_init__(self):
        if self.dt_ode <= 0 or self.horizon <= 0 or self.n_out < 1:
            raise ValueError("flow configuration must be positive")
        spacing = self.horizon / self.n_out
        steps = spacing / self.dt_ode
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("dt_ode must divide the output grid spacing")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_out + 1)


def _rk4_steps(f: Callable, x, t0: float, t1: float, dt: float):
    """Integrate dx/dt = f(x, t) from t0 to t1 with fixed-step RK4 (either direction)."""
    span = t1 - t0
    if span == 0.0:
        return x
    n = max(int(round(abs(span) / dt)), 1)
    h = span / n
    t = t0
    for i in range(n):
        k1 = f(x, t)
        k2 = f(x + 0.5 * h * k1, t + 0.5 * h)
        k3 = f(x + 0.5 * h * k2, t + 0.5 * h)
        k4 = f(x + h * k3, t + h)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t0 + (i + 1) * span / n
        if not np.all(np.isfinite(x)):
            raise ValueError("trajectory blow-up at t=%g" % t)
    return x


def flow_map(b: VectorField, x0, t0: float, t1: float, cfg: FlowConfig):
    """Endpoint of the characteristic through (x0, t0) at time t1 (backward allowed)."""
    scalar = b.d == 1 and np.ndim(x0) == 0
    x = float(x0) if scalar else np.asarray(x0, dtype=float)
    out = _rk4_steps(lambda y, t: np.asarray(b(y, t), dtype=float) if not scalar else float(b(y, t)),
                     x, t0, t1, cfg.dt_ode)
    return out


def flow_map_batch(b: VectorField, xs: np.ndarray, t0: float, t1: float,
                   cfg: FlowConfig) -> np.ndarray:
    """Vectorized flow of many starting points (per-point ODEs are independent)."""
    xs = np.asarray(xs, dtype=float)
    return _rk4_steps(lambda y, t: np.asarray(b.many(y, t), dtype=float), xs.copy(),
                      t0, t1, cfg.dt_ode)


def solve_atomic(b: VectorField, nu: SignedMeasure, cfg: FlowConfig) -> MeasurePath:
    """Transport every atom along its characteristic; weights never change."""
    if not nu.is_atomic():
        raise ValueError("solve_atomic expects a purely atomic initial measure")
    times = cfg.times
    locs = nu.atom_locs.reshape(-1, nu.d)
    weights = nu.atom_weights
    slices = [nu]
    state = locs[:, 0].copy() if nu.d == 1 else locs.copy()
    for i in range(len(times) - 1):
        if len(weights):
            state = flow_map_batch(b, state, float(times[i]), float(times[i + 1]), cfg)
            atoms = [((state[j],) if nu.d == 1 else state[j], weights[j])
                     for j in range(len(weights))]
        else:
            atoms = []
        slices.append(SignedMeasure(nu.d, atoms))
    return MeasurePath(times, slices)


def solve_density_1d(b: VectorField, nu: SignedMeasure, cfg: FlowConfig) -> MeasurePath:
    """Advect density nodes along characteristics; node values are rebuilt from
    the initial cell masses, so each cell's mass is conserved exactly."""
    if nu.d != 1 or not nu.pieces:
        raise ValueError("solve_density_1d expects a 1D density measure")
    if len(nu.atom_weights):
        raise ValueError("mixed atom/density data: solve atoms separately")
    times = cfg.times
    grids = [p.grid.copy() for p in nu.pieces]
    masses = [p.cell_masses() for p in nu.pieces]
    first_vals = [p.values.copy() for p in nu.pieces]
    slices = [nu]
    for i in range(len(times) - 1):
        new_grids = []
        for g in grids:
            g2 = flow_map_batch(b, g, float(times[i]), float(times[i + 1]), cfg)
            if np.any(np.diff(g2) <= 0):
                raise ValueError("characteristics crossed; use viscous solver")
            new_grids.append(g2)
        grids = new_grids
        pieces = []
        for g, m, v0, p0 in zip(grids, masses, first_vals, nu.pieces):
            w = np.diff(g)
            vals = np.empty_like(g)
            vals[0] = v0[0] * (p0.grid[1] - p0.grid[0]) / (g[1] - g[0])
            for c in range(len(w)):
                vals[c + 1] = 2.0 * m[c] / w[c] - vals[c]
            pieces.append(DensityPiece(g, vals))
        slices.append(SignedMeasure(1, density=pieces))
    return MeasurePath(times, slices)


def solve(b: VectorField, nu: SignedMeasure, cfg: FlowConfig) -> MeasurePath:
    """Route initial data to the atomic and/or density characteristic solver."""
    parts = []
    if len(nu.atom_weights):
        parts.append(solve_atomic(b, SignedMeasure(nu.d, nu.atom_list()), cfg))
    if nu.pieces:
        parts.append(solve_density_1d(b, SignedMeasure(1, density=list(nu.pieces)), cfg))
    if not parts:
        return MeasurePath(cfg.times, [SignedMeasure.empty(nu.d) for _ in cfg.times])
    out = parts[0]
    for extra in parts[1:]:
        out = MeasurePath(out.times, [a + bb for a, bb in zip(out.slices, extra.slices)])
    return out


def weak_residual(path: MeasurePath, b: VectorField, u: TestFunction, t: float) -> float:
    """Defect of the weak formulation at an output time t.

    lhs - rhs with rhs = initial term plus the time integral of
    [du/dt + <b, grad u>] d mu_s, accumulated by the trapezoid rule so that
    solver-produced paths resolve to quadrature + integrator error.
    """
    i_t = int(round(t / path.dt)) if path.dt else 0
    if not (0 <= i_t < len(path.times)) or abs(path.times[i_t] - t) > 1e-9 * max(1.0, path.horizon):
        raise ValueError("t is not on the output time grid")
    lhs = integrate(path.slices[i_t], lambda x: u.value(x, t))
    rhs = integrate(path.slices[0], lambda x: u.value(x, 0.0))
    if i_t > 0:
        def generator(i):
            s = float(path.times[i])
            if b.d == 1:
                return integrate(path.slices[i],
                                 lambda x: u.dt(x, s) + np.asarray(b(x, s)) * u.grad(x, s))
            return integrate(path.slices[i],
                             lambda x: u.dt(x, s) + float(np.dot(np.asarray(b(x, s)),
                                                                 np.asarray(u.grad(x, s)))))
        vals = [generator(i) for i in range(i_t + 1)]
        weights = np.full(i_t + 1, path.dt)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        rhs += float(math.fsum(w * v for w, v in zip(weights, vals)))
    return float(lhs - rhs)


class MomentGateError(RuntimeError):
    """The initial measure carries too much mass where the weights blow up."""


@dataclass
class ExistenceRun:
    """Per-k solves with weight-moment series and consecutive-path distances."""

    ks: list[int]
    paths: dict[int, MeasurePath]
    moments: dict[int, np.ndarray]          # m_k(t) on the output grid
    initial_moments: dict[int, float]       # integral of V_k d nu
    distance_times: np.ndarray
    distances: np.ndarray                   # shape (len(ks)-1, len(distance_times))
    region: Box
    mass_drift: dict[int, float] = field(default_factory=dict)

    @property
    def candidate(self) -> MeasurePath:
        return self.paths[max(self.ks)]

    def cauchy_flags(self) -> list[bool]:
        """True when the distance profile shrinks between consecutive k pairs."""
        sup = self.distances.max(axis=1)
        return [bool(sup[i + 1] <= sup[i] + 1e-12) for i in range(len(sup) - 1)]


def existence_sequence(b: VectorField, pairs: Sequence[ApproximationPair],
                       nu: SignedMeasure, cfg: FlowConfig, region: Box,
                       moment_growth_limit: float = 10.0,
                       n_distance_times: int = 11) -> ExistenceRun:
    """Solve with every smoothed field, monitoring sup_k integral of V_k d nu.

    The moment gate rejects initial data that load the degenerate set: the
    per-k initial moments must stay bounded along the schedule (monotone growth
    past the limit raises MomentGateError naming the offending index).
    """
    if np.any(nu.atom_weights < 0):
        raise ValueError("existence construction expects nonnegative initial data")
    pairs = sorted(pairs, key=lambda p: p.k)
    ks = [p.k for p in pairs]
    init = {}
    for p in pairs:
        init[p.k] = integrate(nu, p.V)
        if not math.isfinite(init[p.k]):
            raise MomentGateError("initial weight moment is infinite at k=%d" % p.k)
    vals = [init[k] for k in ks]
    if len(vals) >= 2 and vals[-1] > moment_growth_limit * max(vals[0], 1e-300):
        if all(a <= bb + 1e-12 for a, bb in zip(vals, vals[1:])):
            raise MomentGateError(
                "moment gate failed: integral of V_k d nu grows without bound "
                "(k=%d gives %.6g, k=%d gives %.6g)" % (ks[0], vals[0], ks[-1], vals[-1]))
    paths = {}
    moments = {}
    drift = {}
    for p in pairs:
        path = solve(p.b_k, nu, cfg)
        paths[p.k] = path
        moments[p.k] = np.asarray([integrate(s, p.V) for s in path.slices])
        masses = np.asarray([s.mass() for s in path.slices])
        drift[p.k] = float(np.max(np.abs(masses - nu.mass())))
    stride = max(len(cfg.times) // max(n_distance_times - 1, 1), 1)
    d_idx = list(range(0, len(cfg.times), stride))
    if d_idx[-1] != len(cfg.times) - 1:
        d_idx.append(len(cfg.times) - 1)
    d_times = cfg.times[d_idx]
    distances = np.zeros((len(ks) - 1, len(d_idx)))
    for i in range(len(ks) - 1):
        pa, pb = paths[ks[i]], paths[ks[i + 1]]
        for j, idx in enumerate(d_idx):
            distances[i, j] = bl_distance(pa.slices[idx], pb.slices[idx], region)
    return ExistenceRun(ks, paths, moments, init, d_times, distances, region, drift)


@dataclass
class GronwallReport:
    """Slack of the exponential moment bound and the weight-compatibility margins."""

    slack: dict[int, np.ndarray]            # e^{C3 t} m_k(0) - m_k(t) per grid node
    compat_margin: dict[tuple[int, int], float]   # (k, m): min of C1 V_m + C2 - V_k
    c3: float
    c1: float
    c2: float

    def min_slack(self) -> float:
        return float(min(np.min(v) for v in self.slack.values()))

    def min_compat(self) -> float:
        return float(min(self.compat_margin.values())) if self.compat_margin else math.inf


def gronwall_check(run: ExistenceRun, pairs: Sequence[ApproximationPair], c3: float,
                   c1: float = 9.0, c2: float = 0.0, n_x: int = 201,
                   compare: str = "k<=m") -> GronwallReport:
    """Exponential a priori bound on the weight moments plus pair compatibility.

    compare selects which ordered pairs are tested against V_k <= C1 V_m + C2
    on the run region ("k<=m" per the existence construction; "k>m" checks the
    reversed worked-example inequality on the same grid).
    """
    slack = {}
    times = run.candidate.times
    for k in run.ks:
        slack[k] = np.exp(c3 * times) * run.initial_moments[k] - run.moments[k]
    by_k = {p.k: p for p in pairs}
    xs = np.linspace(run.region.lo[0], run.region.hi[0], n_x)
    compat = {}
    for k in run.ks:
        for m in run.ks:
            take = (k <= m) if compare == "k<=m" else (k > m)
            if not take or k == m:
                continue
            vk = np.asarray(by_k[k].V(xs))
            vm = np.asarray(by_k[m].V(xs))
            compat[(k, m)] = float(np.min(c1 * vm + c2 - vk))
    return GronwallReport(slack, compat, c3, c1, c2)
