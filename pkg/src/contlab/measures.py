"""Locally bounded signed measures on R^d and time-indexed measure paths.

Measures are atoms plus (in 1D) piecewise-linear densities, the data model
for initial conditions, solver output slices and solution differences.  All
values are immutable after construction and every operation is pure.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy import sparse

ATOM_MERGE_TOL = 0.0  # atoms merge only on exact location equality


class Box:
    """Axis-aligned box, the only region type the integrators accept."""

    def __init__(self, bounds: Sequence[tuple[float, float]]):
        b = np.atleast_2d(np.asarray(bounds, dtype=float))
        if b.shape[1] != 2:
            raise ValueError("bounds must be (lo, hi) pairs")
        self.lo = b[:, 0].copy()
        self.hi = b[:, 1].copy()
        if np.any(self.hi < self.lo):
            raise ValueError("box has hi < lo")
        self.d = len(self.lo)

    @classmethod
    def interval(cls, lo: float, hi: float) -> "Box":
        return cls([(lo, hi)])

    @classmethod
    def cube(cls, radius: float, d: int) -> "Box":
        return cls([(-radius, radius)] * d)

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Vectorized membership for points of shape (..., d)."""
        x = np.asarray(x, dtype=float)
        if self.d == 1 and x.ndim <= 1:
            return (x >= self.lo[0]) & (x <= self.hi[0])
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def __repr__(self):
        return "Box(%s)" % list(zip(self.lo.tolist(), self.hi.tolist()))


def _require_bounded(region: Box):
    if not region.bounded:
        raise ValueError("region must be bounded")


@dataclass(frozen=True)
class DensityPiece:
    """One piecewise-linear density profile, zero outside its grid span."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or v.shape != g.shape or len(g) < 2:
            raise ValueError("density needs matching 1D grid/values with >= 2 nodes")
        if not np.all(np.diff(g) > 0):
            raise ValueError("density grid must be strictly increasing")
        if not (np.all(np.isfinite(g)) and np.all(np.isfinite(v))):
            raise ValueError("density data must be finite")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.grid[0]), float(self.grid[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.grid, self.values, left=0.0, right=0.0)
        return out

    def cell_masses(self) -> np.ndarray:
        """Exact trapezoid mass of each cell."""
        return 0.5 * (self.values[:-1] + self.values[1:]) * np.diff(self.grid)

    def mass(self) -> float:
        return float(np.sum(self.cell_masses()))

    def refined(self, extra_nodes: Sequence[float]) -> "DensityPiece":
        """Insert nodes (values by interpolation); exact refinement."""
        lo, hi = self.span
        extra = [x for x in extra_nodes if lo < x < hi]
        if not extra:
            return self
        g = np.unique(np.concatenate([self.grid, np.asarray(extra, dtype=float)]))
        return DensityPiece(g, self(g))

    def with_sign_nodes(self) -> "DensityPiece":
        """Insert nodes at sign crossings so |values| is exact piecewise-linear."""
        roots = []
        g, v = self.grid, self.values
        for i in range(len(g) - 1):
            if v[i] * v[i + 1] < 0:
                roots.append(g[i] - v[i] * (g[i + 1] - g[i]) / (v[i + 1] - v[i]))
        return self.refined(roots)

    def abs(self) -> "DensityPiece":
        p = self.with_sign_nodes()
        return DensityPiece(p.grid, np.abs(p.values))

    def tv_on(self, lo: float, hi: float) -> float:
        """Exact integral of |density| over [lo, hi] (piecewise-linear quadrature)."""
        p = self.abs().clip(lo, hi)
        return 0.0 if p is None else p.mass()

    def clip(self, lo: float, hi: float) -> "DensityPiece | None":
        a, b = self.span
        lo, hi = max(lo, a), min(hi, b)
        if hi <= lo:
            return None
        p = self.refined([lo, hi])
        # refined() guarantees nodes at lo and hi
        i0 = int(np.searchsorted(p.grid, lo))
        i1 = int(np.searchsorted(p.grid, hi))
        return DensityPiece(p.grid[i0:i1 + 1], p.values[i0:i1 + 1])

    def scaled(self, c: float) -> "DensityPiece":
        return DensityPiece(self.grid, c * self.values)


def _merge_atoms(locs: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Canonical atom list: lexicographic order, coincident atoms merged, zero weights dropped."""
    if len(weights) == 0:
        return locs.reshape(0, locs.shape[1] if locs.ndim == 2 else 1), weights
    order = np.lexsort(locs.T[::-1])
    locs, weights = locs[order], weights[order]
    out_locs, out_w = [], []
    for loc, w in zip(locs, weights):
        if out_locs and np.array_equal(out_locs[-1], loc):
            out_w[-1] += w
        else:
            out_locs.append(loc)
            out_w.append(w)
    locs = np.asarray(out_locs, dtype=float)
    weights = np.asarray(out_w, dtype=float)
    keep = weights != 0.0
    return locs[keep], weights[keep]


class SignedMeasure:
    """Finitely many weighted atoms plus optional 1D piecewise-linear density.

    Atoms are (location, weight) with pairwise distinct locations (coincident
    atoms merge by weight summation, exact zeros are dropped).  Densities are
    restricted to d = 1 and may consist of several non-overlapping pieces so
    that restriction/split operations stay exact.
    """

    def __init__(self, d: int, atoms=(), density=None):
        if d < 1:
            raise ValueError("dimension must be a positive integer")
        self.d = int(d)
        locs, weights = [], []
        for loc, w in atoms:
            loc = np.atleast_1d(np.asarray(loc, dtype=float))
            if loc.shape != (self.d,):
                raise ValueError("atom location has wrong dimension")
            w = float(w)
            if not (np.all(np.isfinite(loc)) and math.isfinite(w)):
                raise ValueError("atom data must be finite")
            locs.append(loc)
            weights.append(w)
        locs = np.asarray(locs, dtype=float).reshape(len(weights), self.d)
        self.atom_locs, self.atom_weights = _merge_atoms(locs, np.asarray(weights))
        if density is None:
            pieces: tuple[DensityPiece, ...] = ()
        elif isinstance(density, DensityPiece):
            pieces = (density,)
        elif isinstance(density, (tuple, list)) and all(isinstance(p, DensityPiece) for p in density):
            pieces = tuple(sorted(density, key=lambda p: p.span[0]))
            for a, b in zip(pieces, pieces[1:]):
                if b.span[0] < a.span[1]:
                    raise ValueError("density pieces overlap")
        else:
            grid, values = density
            pieces = (DensityPiece(np.asarray(grid), np.asarray(values)),)
        if pieces and self.d != 1:
            raise ValueError("densities are supported only for d = 1")
        self.pieces = pieces

    # -- constructors -------------------------------------------------------

    @classmethod
    def dirac(cls, loc, weight: float = 1.0, d: int | None = None) -> "SignedMeasure":
        loc = np.atleast_1d(np.asarray(loc, dtype=float))
        return cls(d if d is not None else len(loc), atoms=[(loc, weight)])

    @classmethod
    def from_density(cls, grid, values) -> "SignedMeasure":
        return cls(1, density=(grid, values))

    @classmethod
    def empty(cls, d: int = 1) -> "SignedMeasure":
        return cls(d)

    @classmethod
    def uniform(cls, lo: float, hi: float, mass: float = 1.0, n: int = 2) -> "SignedMeasure":
        grid = np.linspace(lo, hi, max(n, 2))
        return cls.from_density(grid, np.full_like(grid, mass / (hi - lo)))

    # -- basic queries -------------------------------------------------------

    @property
    def density(self) -> DensityPiece | None:
        if not self.pieces:
            return None
        if len(self.pieces) == 1:
            return self.pieces[0]
        raise ValueError("measure has several density pieces")

    def is_atomic(self) -> bool:
        return not self.pieces

    def mass(self) -> float:
        return float(np.sum(self.atom_weights)) + sum(p.mass() for p in self.pieces)

    def atom_list(self) -> list[tuple[np.ndarray, float]]:
        return [(self.atom_locs[i].copy(), float(self.atom_weights[i]))
                for i in range(len(self.atom_weights))]

    # -- algebra -------------------------------------------------------------

    def scaled(self, c: float) -> "SignedMeasure":
        atoms = [(loc, c * w) for loc, w in self.atom_list()]
        return SignedMeasure(self.d, atoms, [p.scaled(c) for p in self.pieces] or None)

    def __add__(self, other: "SignedMeasure") -> "SignedMeasure":
        if self.d != other.d:
            raise ValueError("dimension mismatch")
        atoms = self.atom_list() + other.atom_list()
        pieces = _add_pieces(self.pieces, other.pieces)
        return SignedMeasure(self.d, atoms, pieces or None)

    def __sub__(self, other: "SignedMeasure") -> "SignedMeasure":
        return self + other.scaled(-1.0)

    def abs(self) -> "SignedMeasure":
        atoms = [(loc, np.abs(w)) for loc, w in self.atom_list()]
        return SignedMeasure(self.d, atoms, [p.abs() for p in self.pieces] or None)

    def restrict(self, region: Box) -> "SignedMeasure":
        """Exact restriction m|_region (atoms filtered, densities clipped)."""
        _require_bounded(region)
        keep = region.contains(self.atom_locs.reshape(-1, self.d)) if len(self.atom_weights) else []
        atoms = [(self.atom_locs[i], self.atom_weights[i])
                 for i in range(len(self.atom_weights)) if keep[i]]
        pieces = []
        for p in self.pieces:
            q = p.clip(region.lo[0], region.hi[0])
            if q is not None:
                pieces.append(q)
        return SignedMeasure(self.d, atoms, pieces or None)

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        if self.d == 1:
            atoms = [[float(l[0]), float(w)] for l, w in self.atom_list()]
        else:
            atoms = [[[float(c) for c in l], float(w)] for l, w in self.atom_list()]
        out: dict = {"d": self.d, "atoms": atoms}
        if len(self.pieces) == 1:
            p = self.pieces[0]
            out["density"] = {"grid": p.grid.tolist(), "values": p.values.tolist()}
        elif len(self.pieces) > 1:
            out["density"] = {"pieces": [{"grid": p.grid.tolist(), "values": p.values.tolist()}
                                         for p in self.pieces]}
        return out

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SignedMeasure":
        d = int(obj["d"])
        atoms = []
        for entry in obj.get("atoms", []):
            loc, w = entry[0], entry[-1]
            if d == 1 and np.isscalar(loc):
                loc = [loc]
            atoms.append((loc, w))
        dens = obj.get("density")
        pieces = None
        if dens is not None:
            if "pieces" in dens:
                pieces = [DensityPiece(np.asarray(p["grid"]), np.asarray(p["values"]))
                          for p in dens["pieces"]]
            else:
                pieces = [DensityPiece(np.asarray(dens["grid"]), np.asarray(dens["values"]))]
        return cls(d, atoms, pieces)


def _add_pieces(a: tuple[DensityPiece, ...], b: tuple[DensityPiece, ...]) -> list[DensityPiece]:
    """Sum of two piecewise-linear families, exact on the union grid.

    Pieces that overlap are merged on a refined common grid; disjoint pieces
    are kept separate so spans (and hence jumps at span edges) are preserved.
    """
    pieces = sorted(a + b, key=lambda p: p.span[0])
    out: list[DensityPiece] = []
    for p in pieces:
        if out and p.span[0] < out[-1].span[1]:
            q = out.pop()
            lo = min(q.span[0], p.span[0])
            hi = max(q.span[1], p.span[1])
            grid = np.unique(np.concatenate([q.grid, p.grid]))
            out.append(DensityPiece(grid, q(grid) * _span_mask(q, grid) + p(grid) * _span_mask(p, grid)))
        else:
            out.append(p)
    return out


def _span_mask(p: DensityPiece, grid: np.ndarray) -> np.ndarray:
    lo, hi = p.span
    return ((grid >= lo) & (grid <= hi)).astype(float)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def total_variation(m: SignedMeasure, region: Box) -> float:
    """|m|(region): sum of |atom weights| in region plus exact integral of |density|."""
    _require_bounded(region)
    tv = 0.0
    if len(m.atom_weights):
        inside = region.contains(m.atom_locs.reshape(-1, m.d))
        tv += float(np.sum(np.abs(m.atom_weights[inside])))
    for p in m.pieces:
        tv += p.tv_on(region.lo[0], region.hi[0])
    return tv


def _simpson_cells(f: Callable, grid: np.ndarray, values: np.ndarray, tol: float) -> float:
    """Integrate f(x) * pw-linear(values) cell by cell: vectorized Simpson with
    one global refinement for error control, scalar adaptive fallback per cell."""
    x0, x1 = grid[:-1], grid[1:]
    v0, v1 = values[:-1], values[1:]
    xm = 0.5 * (x0 + x1)
    vm = 0.5 * (v0 + v1)
    h = x1 - x0

    def feval(xs):
        out = np.asarray(f(xs), dtype=float)
        if out.shape != np.shape(xs):
            raise ValueError("integrand must be vectorized over x")
        return out

    try:
        f0, fm, f1 = feval(x0), feval(xm), feval(x1)
    except Exception:
        fv = np.vectorize(lambda x: float(f(x)))
        f0, fm, f1 = fv(x0), fv(xm), fv(x1)
        feval = fv
    if not (np.all(np.isfinite(f0)) and np.all(np.isfinite(fm)) and np.all(np.isfinite(f1))):
        raise ValueError("integrand is not finite on the density support")
    coarse = h / 6.0 * (f0 * v0 + 4.0 * fm * vm + f1 * v1)
    # refine once: two Simpson panels per cell
    xl = 0.5 * (x0 + xm)
    xr = 0.5 * (xm + x1)
    fl, fr = feval(xl), feval(xr)
    vl = 0.5 * (v0 + vm)
    vr = 0.5 * (vm + v1)
    fine = h / 12.0 * (f0 * v0 + 4.0 * fl * vl + 2.0 * fm * vm + 4.0 * fr * vr + f1 * v1)
    err = np.abs(fine - coarse) / 15.0
    total = float(np.sum(fine))
    bad = np.nonzero(err > max(tol, 1e-15) / max(len(h), 1))[0]
    for i in bad:
        total -= fine[i]
        total += _adaptive_cell(feval, grid[i], grid[i + 1], values[i], values[i + 1], tol / max(len(bad), 1))
    return total


def _adaptive_cell(f, a, b, va, vb, tol, depth=0) -> float:
    lin = lambda x: va + (vb - va) * (x - a) / (b - a)
    m = 0.5 * (a + b)
    fa, fm, fb = float(f(a)) * va, float(f(m)) * lin(m), float(f(b)) * vb
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    ml, mr = 0.5 * (a + m), 0.5 * (m + b)
    left = (m - a) / 6.0 * (fa + 4.0 * float(f(ml)) * lin(ml) + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * float(f(mr)) * lin(mr) + fb)
    if depth >= 24 or abs(left + right - whole) < 15.0 * tol:
        return left + right + (left + right - whole) / 15.0
    return (_adaptive_cell(f, a, m, va, lin(m), tol / 2, depth + 1)
            + _adaptive_cell(f, m, b, lin(m), vb, tol / 2, depth + 1))


def integrate(m: SignedMeasure, phi: Callable, region: Box | None = None,
              tol: float = 1e-10) -> float:
    """Integral of phi against m; Simpson with error control on density cells."""
    total = 0.0
    locs = m.atom_locs.reshape(-1, m.d)
    for i in range(len(m.atom_weights)):
        x = locs[i] if m.d > 1 else float(locs[i][0])
        if region is not None and not region.contains(np.atleast_1d(locs[i])
                                                      if m.d > 1 else locs[i][0]):
            continue
        val = float(phi(x))
        if not math.isfinite(val):
            raise ValueError("integrand is not finite on the measure support")
        total += m.atom_weights[i] * val
    for p in m.pieces:
        q = p if region is None else p.clip(region.lo[0], region.hi[0])
        if q is None:
            continue
        total += _simpson_cells(phi, q.grid, q.values, tol)
    return total


def pushforward(m: SignedMeasure, mapping: Callable) -> SignedMeasure:
    """Image measure under mapping.

    Atoms move with unchanged weights.  A 1D density requires a strictly
    monotone map on its span; node values are rebuilt so the change-of-variables
    mass identity holds cell by cell (anchored recursion on cell masses).
    """
    atoms = []
    for loc, w in m.atom_list():
        y = mapping(loc if m.d > 1 else float(loc[0]))
        atoms.append((np.atleast_1d(np.asarray(y, dtype=float)), w))
    pieces = []
    for p in m.pieces:
        y = np.asarray([float(mapping(float(x))) for x in p.grid])
        d = np.diff(y)
        if np.all(d > 0):
            grid_new, masses = y, p.cell_masses()
            v_anchor = p.values[0] * (p.grid[1] - p.grid[0]) / (y[1] - y[0])
        elif np.all(d < 0):
            grid_new, masses = y[::-1], p.cell_masses()[::-1]
            v_anchor = p.values[-1] * (p.grid[-1] - p.grid[-2]) / (y[-2] - y[-1])
        else:
            raise ValueError("density push-forward requires monotone map")
        vals = np.empty_like(grid_new)
        vals[0] = v_anchor
        w = np.diff(grid_new)
        for i in range(len(w)):
            vals[i + 1] = 2.0 * masses[i] / w[i] - vals[i]
        pieces.append(DensityPiece(grid_new, vals))
    return SignedMeasure(m.d, atoms, pieces or None)


def bl_distance(a: SignedMeasure, b: SignedMeasure, region: Box,
                h: float | None = None) -> float:
    """Flat (bounded-Lipschitz) distance on a mesh over the region.

    sup { integral of phi d(a-b) : |phi| <= 1, Lip(phi) <= 1, supp phi in region },
    solved as a linear program over mesh-node values of phi.  Mesh error is
    O(h * (TV(a) + TV(b))); see bl_error_bound.
    """
    _require_bounded(region)
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    if a.d != 1 and (a.pieces or b.pieces):
        raise ValueError("bl_distance supports 1D measures or pure atoms")
    if a.d > 1:
        raise NotImplementedError("bl_distance is implemented for d = 1")
    lo, hi = float(region.lo[0]), float(region.hi[0])
    width = hi - lo
    if h is None:
        h = 1e-3 * width
    n = max(int(np.ceil(width / h)), 4)
    nodes = np.linspace(lo, hi, n + 1)
    h = nodes[1] - nodes[0]
    c = _mesh_masses(a, nodes) - _mesh_masses(b, nodes)
    if not np.any(c):
        return 0.0
    m = len(nodes)
    D = sparse.diags([np.full(m - 1, -1.0), np.full(m - 1, 1.0)], [0, 1],
                     shape=(m - 1, m)).tocsc()
    A_ub = sparse.vstack([D, -D]).tocsc()
    b_ub = np.full(2 * (m - 1), h)
    bounds = [(-1.0, 1.0)] * m
    bounds[0] = bounds[-1] = (0.0, 0.0)  # supp phi inside the region
    res = linprog(-c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError("flat-distance LP failed: %s" % res.message)
    return float(-res.fun)


def bl_error_bound(a: SignedMeasure, b: SignedMeasure, region: Box,
                   h: float | None = None) -> float:
    """Documented mesh-error bound for bl_distance."""
    if h is None:
        h = 1e-3 * float(region.width()[0])
    return h * (total_variation(a, region) + total_variation(b, region))


def _mesh_masses(m: SignedMeasure, nodes: np.ndarray) -> np.ndarray:
    """Signed mass snapped to mesh nodes (atoms to nearest node, density by
    exact integral over node cells)."""
    out = np.zeros(len(nodes))
    lo, hi = nodes[0], nodes[-1]
    h = nodes[1] - nodes[0]
    for loc, w in m.atom_list():
        x = float(loc[0])
        if lo <= x <= hi:
            out[int(round((x - lo) / h))] += w
    if m.pieces:
        edges = np.concatenate([[lo], 0.5 * (nodes[:-1] + nodes[1:]), [hi]])
        for p in m.pieces:
            q = p.clip(lo, hi)
            if q is None:
                continue
            r = q.refined(list(edges))
            cums = np.concatenate([[0.0], np.cumsum(r.cell_masses())])
            idx = np.clip(np.searchsorted(r.grid, edges), 0, len(cums) - 1)
            vals = np.where(edges < r.grid[0], 0.0,
                            np.where(edges > r.grid[-1], cums[-1], cums[idx]))
            out += np.diff(vals)
    return out


class TestFunction:
    """C^{1,1} space-time test function vanishing for |x| > support_radius."""

    def __init__(self, value: Callable, grad: Callable, dt: Callable,
                 support_radius: float, d: int = 1):
        self.value = value
        self.grad = grad
        self.dt = dt
        self.support_radius = float(support_radius)
        self.d = d

    def check_derivatives(self, rng: np.random.Generator, n: int = 20,
                          rel_tol: float = 1e-5) -> float:
        """Sampled finite-difference consistency check; returns worst relative error."""
        worst = 0.0
        R = self.support_radius
        for _ in range(n):
            x = rng.uniform(-0.8 * R, 0.8 * R, size=self.d)
            t = rng.uniform(0.0, 1.0)
            xq = x if self.d > 1 else float(x[0])
            g = np.atleast_1d(self.grad(xq, t))
            for j in range(self.d):
                e = np.zeros(self.d)
                e[j] = 1e-6 * (1.0 + abs(x[j]))
                xp = (x + e) if self.d > 1 else float(x[0] + e[0])
                xm = (x - e) if self.d > 1 else float(x[0] - e[0])
                fd = (self.value(xp, t) - self.value(xm, t)) / (2 * e[j])
                scale = max(abs(g[j]), abs(fd), 1e-8)
                worst = max(worst, abs(fd - g[j]) / scale)
            ht = 1e-6
            fd = (self.value(xq, t + ht) - self.value(xq, t - ht)) / (2 * ht)
            dt = self.dt(xq, t)
            worst = max(worst, abs(fd - dt) / max(abs(dt), abs(fd), 1e-8))
        return worst


def _bump_profile(u):
    """exp(1 - 1/(1-u^2)) on |u| < 1, zero outside; smooth with exact derivative."""
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    out = np.zeros_like(u)
    w = 1.0 - u[inside] ** 2
    out[inside] = np.exp(1.0 - 1.0 / w)
    return out


def _bump_profile_d(u):
    u = np.asarray(u, dtype=float)
    inside = np.abs(u) < 1.0
    out = np.zeros_like(u)
    w = 1.0 - u[inside] ** 2
    out[inside] = np.exp(1.0 - 1.0 / w) * (-2.0 * u[inside] / w ** 2)
    return out


def bump(center: float = 0.0, radius: float = 1.0, amplitude: float = 1.0) -> TestFunction:
    """Static smooth bump psi(x) = amplitude * exp(1 - 1/(1 - ((x-c)/r)^2))."""

    def value(x, t=0.0):
        return amplitude * _bump_profile((np.asarray(x) - center) / radius)

    def grad(x, t=0.0):
        return amplitude / radius * _bump_profile_d((np.asarray(x) - center) / radius)

    def dt(x, t=0.0):
        return np.zeros_like(np.asarray(x, dtype=float))

    return TestFunction(value, grad, dt, abs(center) + radius, d=1)


def separable(psi: TestFunction, tau: Callable, dtau: Callable) -> TestFunction:
    """u(x,t) = psi(x) * tau(t) with analytic derivatives."""
    return TestFunction(
        lambda x, t: psi.value(x, 0.0) * tau(t),
        lambda x, t: psi.grad(x, 0.0) * tau(t),
        lambda x, t: psi.value(x, 0.0) * dtau(t),
        psi.support_radius, psi.d)


def random_test_function(rng: np.random.Generator, x_scale: float = 1.0) -> TestFunction:
    """Random separable bump with linear-in-time factor (for residual checks)."""
    center = rng.uniform(-0.5, 0.5) * x_scale
    radius = rng.uniform(0.5, 1.5) * x_scale
    amp = rng.uniform(0.5, 2.0)
    a, b = rng.uniform(0.2, 1.0), rng.uniform(-1.0, 1.0)
    return separable(bump(center, radius, amp), lambda t: a + b * t, lambda t: b)


class MeasurePath:
    """Family (mu_t) on a uniform grid over [0, T], read as mu = mu_t dt with
    piecewise-constant-in-time slices on [t_i, t_{i+1})."""

    def __init__(self, times: np.ndarray, slices: Sequence[SignedMeasure]):
        times = np.asarray(times, dtype=float)
        if len(times) != len(slices) or len(times) < 1:
            raise ValueError("times and slices must match")
        if len(times) > 1:
            dt = np.diff(times)
            if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12) or dt[0] <= 0:
                raise ValueError("time grid must be uniform and increasing")
        if times[0] != 0.0:
            raise ValueError("time grid must start at 0")
        d = slices[0].d
        if any(s.d != d for s in slices):
            raise ValueError("all slices must share dimension")
        self.times = times
        self.slices = list(slices)
        self.d = d

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    def slice_at(self, t: float) -> SignedMeasure:
        i = int(round(t / self.dt)) if self.dt else 0
        if not (0 <= i < len(self.slices)) or abs(self.times[i] - t) > 1e-9 * max(1.0, self.horizon):
            raise ValueError("t is not on the output time grid")
        return self.slices[i]

    def abs(self) -> "MeasurePath":
        return MeasurePath(self.times, [s.abs() for s in self.slices])

    def __sub__(self, other: "MeasurePath") -> "MeasurePath":
        if len(self.times) != len(other.times) or not np.allclose(self.times, other.times):
            raise ValueError("paths must share the time grid")
        return MeasurePath(self.times, [a - b for a, b in zip(self.slices, other.slices)])

    def to_json_dict(self) -> dict:
        return {"T": self.horizon, "times": self.times.tolist(),
                "slices": [s.to_json_dict() for s in self.slices]}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MeasurePath":
        return cls(np.asarray(obj["times"], dtype=float),
                   [SignedMeasure.from_json_dict(s) for s in obj["slices"]])

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def loads(cls, s: str) -> "MeasurePath":
        return cls.from_json_dict(json.loads(s))


def path_integrate(p: MeasurePath, u: Callable, region: Box | None = None,
                   tol: float = 1e-10) -> float:
    """Left-endpoint time rule: sum_i dt * integral of u(., t_i) d mu_{t_i}.

    Exact for the piecewise-constant-in-time path interpretation.
    """
    if len(p.times) < 2:
        return 0.0
    dt = p.dt
    acc = []
    for i in range(len(p.times) - 1):
        t = float(p.times[i])
        acc.append(integrate(p.slices[i], lambda x: u(x, t), region=region, tol=tol))
    return dt * float(math.fsum(acc))
