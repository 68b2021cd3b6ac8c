"""Backward dual transport problem along characteristics, its maximum-principle
and gradient bounds, and the duality-gap estimate driving uniqueness."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .certify import ApproximationPair
from .fields import SmoothField, VectorField
from .measures import Box, MeasurePath, TestFunction, integrate, path_integrate
from .transport import FlowConfig, flow_map, flow_map_batch


def support_radius_bound(s: float, r: float, c1: float) -> float:
    """Radius R beyond which the dual solution vanishes.

    From the a priori trajectory estimate |x(s)|^2 >= |x0|^2 e^{-3 C1 s} - C1 s:
    points with |x0| >= R cannot reach the terminal support {|x| <= r}.
    """
    rr = max(r, r * r)  # enforce |x(s)|^2 >= r^2, not just >= r
    return math.sqrt((rr + c1 * s) * math.exp(3.0 * c1 * s)) * (1.0 + 1e-12)


class DualSolution:
    """f(x, t) = psi(flow endpoint at the terminal time), the characteristic
    representation of the backward dual problem."""

    def __init__(self, field: VectorField, psi: TestFunction, s: float,
                 cfg: FlowConfig, support_r: float | None = None,
                 label: str = "dual"):
        self.field = field
        self.psi = psi
        self.s = float(s)
        self.cfg = cfg
        c1 = field.growth_const
        if support_r is None:
            if c1 is None:
                raise ValueError("dual field needs a recorded linear growth constant")
            support_r = support_radius_bound(self.s, psi.support_radius, c1)
        self.support_radius = float(support_r)
        self.label = label

    def endpoint(self, x, t: float):
        return flow_map(self.field, x, t, self.s, self.cfg)

    def evaluate(self, x, t: float) -> float:
        if t > self.s + 1e-12:
            raise ValueError("dual solution lives on t <= s")
        return float(self.psi.value(self.endpoint(x, t), self.s))

    def evaluate_many(self, xs: np.ndarray, t: float) -> np.ndarray:
        ends = flow_map_batch(self.field, np.asarray(xs, dtype=float), t, self.s, self.cfg)
        return np.asarray(self.psi.value(ends, self.s), dtype=float)

    def grad_sq(self, x, t: float, h_rel: float = 1e-5) -> float:
        """|grad f|^2 by central differences with step h = h_rel (1 + |x|)."""
        if self.field.d == 1:
            h = h_rel * (1.0 + abs(float(x)))
            fp, fm = self.evaluate_many(np.asarray([x + h, x - h]), t)
            return float(((fp - fm) / (2.0 * h)) ** 2)
        x = np.asarray(x, dtype=float)
        total = 0.0
        for i in range(self.field.d):
            e = np.zeros(self.field.d)
            e[i] = h_rel * (1.0 + abs(x[i]))
            fp = self.evaluate(x + e, t)
            fm = self.evaluate(x - e, t)
            total += ((fp - fm) / (2.0 * e[i])) ** 2
        return float(total)


def solve_dual(b_k: SmoothField, psi: TestFunction, s: float, cfg: FlowConfig) -> DualSolution:
    """Dual solution for the smooth drift: constant along its characteristics."""
    return DualSolution(b_k, psi, s, cfg)


@dataclass
class GradientBoundReport:
    margin: float
    max_principle_margin: float
    support_margin: float
    sup_ratio: float


def gradient_bound_check(dual: DualSolution, V: Callable, c2: float, region: Box,
                         n_x: int = 41, n_t: int = 9) -> GradientBoundReport:
    """Sampled margins of the three dual estimates.

    Gradient bound: V(x) e^{C2 (s-t)} max_y |grad psi|^2 / V(y) - |grad f|^2 >= 0.
    Maximum principle: max |psi| - sup |f| over all samples (exact for the
    characteristic representation, so the sup of |psi| is taken over both a
    dense terminal grid and every flow endpoint used).
    Support: f vanishes on the ring |x| = support radius.
    """
    if dual.field.d != 1:
        raise NotImplementedError("bound checks are implemented for d = 1")
    lo, hi = float(region.lo[0]), float(region.hi[0])
    xs = np.linspace(lo, hi, n_x)
    ts = np.linspace(0.0, dual.s, n_t)
    psi_grid = np.linspace(-dual.psi.support_radius, dual.psi.support_radius, 4001)
    psi_vals = np.abs(np.asarray(dual.psi.value(psi_grid, dual.s), dtype=float))
    grad_vals = np.asarray(dual.psi.grad(psi_grid, dual.s), dtype=float)
    v_psi = np.asarray(V(psi_grid))
    ratio_max = float(np.max(grad_vals ** 2 / v_psi))
    psi_max = float(np.max(psi_vals))
    margin = np.inf
    f_abs_max = 0.0
    h = 1e-5 * (1.0 + np.abs(xs))
    for t in ts:
        batch = np.concatenate([xs, xs + h, xs - h])
        f_vals = dual.evaluate_many(batch, float(t))
        f0, fp, fm = np.split(f_vals, 3)
        psi_max = max(psi_max, float(np.max(np.abs(f0))))
        f_abs_max = max(f_abs_max, float(np.max(np.abs(f0))))
        gsq = ((fp - fm) / (2.0 * h)) ** 2
        rhs = np.asarray(V(xs)) * math.exp(c2 * (dual.s - t)) * ratio_max
        margin = min(margin, float(np.min(rhs - gsq)))
    mp_margin = psi_max - f_abs_max
    ring = dual.support_radius
    support_vals = [abs(dual.evaluate(x, float(t)))
                    for x in (-ring, ring) for t in ts]
    return GradientBoundReport(float(margin), float(mp_margin),
                               float(-max(support_vals)), ratio_max)


class CutoffProfile:
    """Smooth cutoff zeta = chi^2 with |grad zeta|^2 / zeta <= C(zeta) by construction."""

    def __init__(self, inner: float, outer: float):
        if not 0 < inner < outer:
            raise ValueError("need 0 < inner < outer")
        self.inner = float(inner)
        self.outer = float(outer)

    def chi(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        u = np.clip((x - self.inner) / (self.outer - self.inner), 0.0, 1.0)
        return np.cos(0.5 * np.pi * u) ** 2

    def chi_prime(self, x):
        x = np.asarray(x, dtype=float)
        a = np.abs(x)
        w = self.outer - self.inner
        u = (a - self.inner) / w
        inside = (u > 0.0) & (u < 1.0)
        out = np.zeros_like(x)
        out[inside] = (-np.pi / w * np.cos(0.5 * np.pi * u[inside])
                       * np.sin(0.5 * np.pi * u[inside]) * np.sign(x[inside]))
        return out

    def __call__(self, x):
        return self.chi(x) ** 2

    def grad(self, x):
        return 2.0 * self.chi(x) * self.chi_prime(x)

    def c_zeta(self, n: int = 4001) -> float:
        """C(zeta) = 4 max |chi'|^2 = sup |grad zeta|^2 / zeta (sampled, exact form)."""
        xs = np.linspace(-self.outer, self.outer, n)
        return 4.0 * float(np.max(self.chi_prime(xs) ** 2))


def cutoff_dual(b_k: SmoothField, psi: TestFunction, s: float, zeta: CutoffProfile,
                delta: float, c: float, cfg: FlowConfig) -> tuple[DualSolution, float]:
    """Dual solution along the flow of zeta * b_k; returns it with M = C + C(zeta)/delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")

    def fn(x, t=0.0):
        return np.asarray(zeta(x)) * np.asarray(b_k(x, t))

    def jac(x, t=0.0):
        return (np.asarray(zeta.grad(x)) * np.asarray(b_k(x, t))
                + np.asarray(zeta(x)) * np.asarray(b_k.jac(x, t)))

    cut_field = SmoothField(1, fn, jac, name="cutoff(%s)" % (b_k.name or "b_k"),
                            growth_const=b_k.growth_const)
    m_const = c + zeta.c_zeta() / delta
    dual = DualSolution(cut_field, psi, s, cfg, label="cutoff-dual")
    return dual, float(m_const)


@dataclass
class GapReport:
    k: int
    lhs: float
    bound: float
    c_tilde: float
    J_k: float

    def to_json_dict(self) -> dict:
        return {"k": self.k, "lhs": self.lhs, "bound": self.bound,
                "C_tilde": self.c_tilde, "J_k": self.J_k}


def duality_gap(psi: TestFunction, s: float, path: MeasurePath, b: VectorField,
                pair: ApproximationPair, region: Box) -> GapReport:
    """Holmgren gap: integral of psi d mu_s against C~ J_k.

    C~ = (2 C(U))^{-1} e^{C2 T / 2} max |grad psi| with C(U) the recorded
    weight floor; J_k integrates |b - b_k| sqrt(V_k) against |mu_t| over [0, s].
    The pair's region must contain {|x| < 2R} for the dual support radius R.
    """
    c1 = pair.growth_const
    R = support_radius_bound(s, psi.support_radius, c1)
    lo, hi = float(pair.region.lo[0]), float(pair.region.hi[0])
    if lo > -2.0 * R or hi < 2.0 * R:
        raise ValueError("pair region must contain the dual support radius 2R")
    mu_s = path.slice_at(s)
    lhs = integrate(mu_s, lambda x: psi.value(x, s))
    grid = np.linspace(-psi.support_radius, psi.support_radius, 4001)
    max_grad = float(np.max(np.abs(psi.grad(grid, s))))
    c_tilde = (2.0 * pair.v_floor) ** -1.0 * math.exp(pair.lyapunov_const * path.horizon / 2.0) * max_grad
    abs_path = path.abs()
    i_s = int(round(s / path.dt)) if path.dt else 0
    sub = MeasurePath(path.times[:i_s + 1], abs_path.slices[:i_s + 1]) if i_s >= 1 else None
    J_k = 0.0 if sub is None else path_integrate(sub, lambda x, t: pair.g(x, t), region=region)
    return GapReport(pair.k, float(lhs), float(c_tilde * J_k), float(c_tilde), float(J_k))


def tail_functional(path: MeasurePath, b: VectorField, N: float) -> float:
    """tau(N) = N^{-1} integral over the annulus {N < |x| < 2N} of |b| d|mu_t| dt."""
    if N <= 0:
        raise ValueError("annulus scale must be positive")
    abs_path = path.abs()
    if path.d == 1:
        def absb(x, t):
            return np.abs(np.asarray(b(x, t)))
        left = Box.interval(-2.0 * N, -N)
        right = Box.interval(N, 2.0 * N)
        val = (path_integrate(abs_path, absb, region=left)
               + path_integrate(abs_path, absb, region=right))
        # boxes are closed; the open annulus differs by a measure-zero overlap
        return float(val / N)
    total = 0.0
    dt = path.dt
    for i in range(len(path.times) - 1):
        s = abs_path.slices[i]
        t = float(path.times[i])
        for loc, w in s.atom_list():
            r = float(np.linalg.norm(loc))
            if N < r < 2.0 * N:
                total += dt * w * float(np.linalg.norm(np.asarray(b(loc, t))))
    return float(total / N)
