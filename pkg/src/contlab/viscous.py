"""1D viscous regularization of the transport problem and the vanishing-viscosity
selection experiment (the upper extreme trajectory emerges as the diffusion
parameter is driven to zero)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import sparse
from scipy.integrate import quad
from scipy.sparse.linalg import splu

from .fields import VectorField
from .measures import DensityPiece, MeasurePath, SignedMeasure


@dataclass(frozen=True)
class FPGrid:
    """Finite-volume grid for the viscous solver.

    dt must satisfy dt <= 0.5 min(dx^2/eps, dx/max|b|) unless the
    unconditional flag is set (Crank-Nicolson diffusion stays stable, but the
    positivity guarantee is then lost).
    """

    a: float
    b: float
    n: int
    dt: float
    eps: float
    unconditional: bool = False

    def __post_init__(self):
        if self.b <= self.a or self.n < 4 or self.dt <= 0 or self.eps <= 0:
            raise ValueError("invalid viscous grid")

    @property
    def dx(self) -> float:
        return (self.b - self.a) / self.n

    def centers(self) -> np.ndarray:
        return self.a + (np.arange(self.n) + 0.5) * self.dx

    def interfaces(self) -> np.ndarray:
        return self.a + np.arange(self.n + 1) * self.dx

    def check_cfl(self, max_b: float) -> None:
        limit = 0.5 * min(self.dx ** 2 / self.eps,
                          self.dx / max(max_b, 1e-300))
        if self.dt > limit and not self.unconditional:
            raise ValueError("time step %.3g violates the stability bound %.3g "
                             "(set the unconditional flag to override)" % (self.dt, limit))

    def stable_dt(self, max_b: float, safety: float = 0.9) -> float:
        return safety * 0.5 * min(self.dx ** 2 / self.eps, self.dx / max(max_b, 1e-300))


def _splat(nu: SignedMeasure, grid: FPGrid) -> np.ndarray:
    """Initial data on cell centers; atoms become normalized hats of width 2 dx."""
    xc = grid.centers()
    u = np.zeros(grid.n)
    for p in nu.pieces:
        u += p(xc)
    for loc, w in nu.atom_list():
        x0 = float(loc[0])
        hat = np.maximum(0.0, 1.0 - np.abs(xc - x0) / grid.dx)
        s = hat.sum() * grid.dx
        if s <= 0:
            raise ValueError("atom at %g falls outside the viscous grid" % x0)
        u += w * hat / s
    return u


def _density_slice(grid: FPGrid, u: np.ndarray) -> SignedMeasure:
    """Cell values as a piecewise-linear density whose total mass equals sum(u) dx.

    Edge nodes replicate the first/last cell value: the trapezoid integral then
    telescopes to the finite-volume mass exactly.
    """
    xc = grid.centers()
    g = np.concatenate([[grid.a], xc, [grid.b]])
    v = np.concatenate([[u[0]], u, [u[-1]]])
    return SignedMeasure(1, density=DensityPiece(g, v))


def solve_fp_1d(b: VectorField, nu: SignedMeasure, grid: FPGrid, T: float,
                n_out: int = 100) -> MeasurePath:
    """Conservative finite-volume solve of the viscous transport equation.

    Implicit upwind advection plus Crank-Nicolson diffusion with zero-flux
    boundaries: mass telescopes exactly and nonnegative data stays nonnegative
    under the stability bound (M-matrix implicit part, nonnegative explicit part).
    """
    xi = grid.interfaces()
    bi = np.asarray(b.many(xi, 0.0), dtype=float)
    grid.check_cfl(float(np.max(np.abs(bi))))
    steps_total = int(math.ceil(T / grid.dt - 1e-12))
    if steps_total % n_out:
        steps_total += n_out - steps_total % n_out  # land exactly on output times
    dt = T / steps_total
    n = grid.n
    dx = grid.dx

    # advection: F_{i+1/2} = b_{i+1/2} * u_upwind, zero flux at the domain ends
    bplus = np.maximum(bi[1:-1], 0.0)
    bminus = np.minimum(bi[1:-1], 0.0)
    diag_adv = np.zeros(n)
    diag_adv[:-1] += bplus / dx        # outflow through the right interface
    diag_adv[1:] += -bminus / dx       # outflow through the left interface
    lower_adv = -bplus / dx            # inflow to the right neighbour
    upper_adv = bminus / dx
    A_adv = sparse.diags([lower_adv, diag_adv, upper_adv], [-1, 0, 1])

    diag_diff = np.full(n, -2.0)
    diag_diff[0] = diag_diff[-1] = -1.0
    D = sparse.diags([np.ones(n - 1), diag_diff, np.ones(n - 1)], [-1, 0, 1]) / dx ** 2
    I = sparse.identity(n)
    lhs = (I + dt * A_adv - 0.5 * grid.eps * dt * D).tocsc()
    rhs_op = (I + 0.5 * grid.eps * dt * D).tocsr()
    lu = splu(lhs)

    u = _splat(nu, grid)
    out_every = steps_total // n_out
    times = np.linspace(0.0, T, n_out + 1)
    slices = [_density_slice(grid, u)]
    for step in range(steps_total):
        u = lu.solve(rhs_op @ u)
        if (step + 1) % out_every == 0:
            slices.append(_density_slice(grid, u))
    return MeasurePath(times, slices)


def median_of_slice(m: SignedMeasure) -> float:
    """Median of a nonnegative 1D density slice (linear interpolation in mass)."""
    p = m.pieces[0]
    masses = np.concatenate([[0.0], np.cumsum(p.cell_masses())])
    half = 0.5 * masses[-1]
    j = int(np.searchsorted(masses, half))
    j = min(max(j, 1), len(masses) - 1)
    m0, m1 = masses[j - 1], masses[j]
    x0, x1 = p.grid[j - 1], p.grid[j]
    if m1 == m0:
        return float(0.5 * (x0 + x1))
    return float(x0 + (half - m0) / (m1 - m0) * (x1 - x0))


def check_upper_extreme_applies(b: VectorField, x_probe: float = 1e-3) -> None:
    """The selection result needs 1/b integrable near the degenerate point."""
    val, _ = quad(lambda y: 1.0 / float(b(y, 0.0)), x_probe * 1e-6, x_probe,
                  limit=200)
    if not math.isfinite(val) or val > 1e6:
        raise ValueError("1/b not integrable: selection result does not apply")


def upper_extreme_trajectory(b: VectorField, times: np.ndarray,
                             x_max: float = 10.0) -> np.ndarray:
    """Trajectory leaving the degenerate zero immediately, via the time map
    t(x) = integral_0^x dy/b(y) inverted by bisection."""
    check_upper_extreme_applies(b)

    def time_map(x: float) -> float:
        if x <= 0.0:
            return 0.0
        val, _ = quad(lambda y: 1.0 / float(b(y, 0.0)), 0.0, x,
                      points=[0.0], limit=400)
        return val

    out = np.empty_like(np.asarray(times, dtype=float))
    for i, t in enumerate(times):
        if t <= 0.0:
            out[i] = 0.0
            continue
        lo, hi = 0.0, x_max
        while time_map(hi) < t:
            hi *= 2.0
            if hi > 1e12:
                raise ValueError("upper-extreme trajectory escapes the search range")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if time_map(mid) < t:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-13 * max(1.0, hi):
                break
        out[i] = 0.5 * (lo + hi)
    return out


@dataclass
class SelectionRow:
    eps: float
    medians: np.ndarray
    sup_distance: float
    terminal_median: float
    terminal_distance: float
    mass_near_zero: float
    min_value: float
    mass_drift: float


@dataclass
class SelectionResult:
    times: np.ndarray
    extreme: np.ndarray
    rows: list[SelectionRow]

    def terminal_distances(self) -> list[float]:
        return [r.terminal_distance for r in self.rows]

    def near_zero_masses(self) -> list[float]:
        return [r.mass_near_zero for r in self.rows]


def selection_experiment(b: VectorField, nu: SignedMeasure, eps_schedule: Sequence[float],
                         grid_factory: Callable[[float], FPGrid], T: float,
                         n_out: int = 50) -> SelectionResult:
    """Vanishing-viscosity sweep: per eps, solve and track the solution median
    against the upper extreme trajectory."""
    check_upper_extreme_applies(b)
    times = np.linspace(0.0, T, n_out + 1)
    extreme = upper_extreme_trajectory(b, times)
    rows = []
    for eps in eps_schedule:
        grid = grid_factory(eps)
        path = solve_fp_1d(b, nu, grid, T, n_out=n_out)
        medians = np.asarray([median_of_slice(s) for s in path.slices])
        dist = np.abs(medians - extreme)
        terminal = path.slices[-1]
        p = terminal.pieces[0]
        dx = grid.dx
        near = p.abs().tv_on(-dx, dx)
        min_val = min(float(np.min(s.pieces[0].values)) for s in path.slices)
        drift = max(abs(s.mass() - nu.mass()) for s in path.slices)
        rows.append(SelectionRow(float(eps), medians, float(np.max(dist)),
                                 float(medians[-1]), float(dist[-1]), float(near),
                                 min_val, float(drift)))
    return SelectionResult(times, extreme, rows)
