"""Approximation pairs (b_k, V_k), hypothesis margins and uniqueness certificates.

Each recipe produces a smooth field together with a positive weight whose
Lyapunov-type inequality and closeness functional decide whether a measure
path belongs to the uniqueness class of the underlying drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fields import (FieldDecomposition, Mollifier, SmoothField, VectorField,
                     cos2_mollifier, modulus_of_continuity, mollify, radial_field)
from .measures import Box, MeasurePath, SignedMeasure, total_variation, path_integrate


# ---------------------------------------------------------------------------
# zero sets
# ---------------------------------------------------------------------------

@dataclass
class ZeroSetInfo:
    """Detected {b = 0} within a working interval: maximal closed subintervals,
    boundary points (endpoints where b leaves the threshold band) and the
    interior Z0 = Z minus boundary."""

    intervals: list[tuple[float, float]]
    boundary: list[float]
    window: tuple[float, float]
    eta: float
    extended_left: bool = False   # leftmost interval touches the window edge
    extended_right: bool = False

    def interior_intervals(self) -> list[tuple[float, float]]:
        out = []
        for lo, hi in self.intervals:
            if hi - lo <= 0:
                continue  # isolated zeros are pure boundary
            out.append((lo, hi))
        return out

    def interior_contains(self, x: float, tol: float = 0.0) -> bool:
        for lo, hi in self.interior_intervals():
            left_open = not (self.extended_left and lo == self.intervals[0][0])
            right_open = not (self.extended_right and hi == self.intervals[-1][1])
            lo_ok = (x > lo + tol) if left_open else (x >= lo - tol)
            hi_ok = (x < hi - tol) if right_open else (x <= hi + tol)
            if lo_ok and hi_ok:
                return True
        return False

    def is_empty(self) -> bool:
        return not self.intervals


def zero_set(b: VectorField | Callable, interval: tuple[float, float],
             eta: float | None = None, n: int = 4097) -> ZeroSetInfo:
    """Grid scan with bisection refinement of Z = {|b| <= eta}."""
    lo, hi = float(interval[0]), float(interval[1])
    fn = (lambda x: b(x, 0.0)) if isinstance(b, VectorField) else b
    xs = np.linspace(lo, hi, n)
    vals = np.abs(np.asarray(fn(xs), dtype=float))
    if eta is None:
        eta = 1e-9 * (1.0 + float(np.max(vals)))
    if eta <= 0:
        raise ValueError("detection threshold eta must be positive")
    mask = vals <= eta
    xtol = 1e-12 * max(1.0, hi - lo)

    def refine(a, bb, inside_left):
        # bisect the crossing of |b| - eta between a (inside) and bb (outside)
        fa = abs(float(fn(a))) - eta
        for _ in range(80):
            m = 0.5 * (a + bb)
            fm = abs(float(fn(m))) - eta
            if (fm <= 0) == inside_left:
                a = m
            else:
                bb = m
            if abs(bb - a) < xtol:
                break
        return 0.5 * (a + bb)

    intervals: list[tuple[float, float]] = []
    boundary: list[float] = []
    i = 0
    while i < n:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and mask[j + 1]:
            j += 1
        left = xs[i] if i == 0 else refine(xs[i], xs[i - 1], True)
        right = xs[j] if j == n - 1 else refine(xs[j], xs[j + 1], True)
        if right - left < xtol:
            point = 0.5 * (left + right)
            intervals.append((point, point))
            boundary.append(point)
        else:
            intervals.append((left, right))
            if i != 0:
                boundary.append(left)
            if j != n - 1:
                boundary.append(right)
        i = j + 1
    ext_l = bool(intervals) and intervals[0][0] <= lo + xtol
    ext_r = bool(intervals) and intervals[-1][1] >= hi - xtol
    return ZeroSetInfo(intervals, sorted(boundary), (lo, hi), float(eta), ext_l, ext_r)


def split_stationary(nu: SignedMeasure, z: ZeroSetInfo) -> tuple[SignedMeasure, SignedMeasure]:
    """nu0 = nu restricted to the zero-set interior, remainder = nu - nu0 (exact)."""
    if nu.d != 1:
        raise ValueError("stationary split is a 1D operation")
    atoms0, atoms1 = [], []
    for loc, w in nu.atom_list():
        (atoms0 if z.interior_contains(float(loc[0])) else atoms1).append((loc, w))
    pieces0, pieces1 = [], []
    for p in nu.pieces:
        cuts = sorted({c for iv in z.interior_intervals() for c in iv})
        refined = p.refined(cuts)
        # walk cells, routing each to nu0 or remainder by midpoint membership
        runs: list[tuple[bool, int, int]] = []
        for c in range(len(refined.grid) - 1):
            mid = 0.5 * (refined.grid[c] + refined.grid[c + 1])
            inside = z.interior_contains(mid)
            if runs and runs[-1][0] == inside and runs[-1][2] == c:
                runs[-1] = (inside, runs[-1][1], c + 1)
            else:
                runs.append((inside, c, c + 1))
        for inside, c0, c1 in runs:
            piece = type(p)(refined.grid[c0:c1 + 1], refined.values[c0:c1 + 1])
            (pieces0 if inside else pieces1).append(piece)
    nu0 = SignedMeasure(1, atoms0, pieces0 or None)
    rem = SignedMeasure(1, atoms1, pieces1 or None)
    return nu0, rem


# ---------------------------------------------------------------------------
# approximation pairs
# ---------------------------------------------------------------------------

@dataclass
class ApproximationPair:
    """One (b_k, V_k) with provenance, region and verified constants.

    v_floor records inf over the region of V_k, uniform in k for the recipe;
    lyapunov_const is the constant in the drift/weight inequality and
    quad_coeff (when set) the |b_k|^2 coefficient of the cutoff variant.
    """

    k: int
    b_k: SmoothField
    V: Callable
    V_grad: Callable
    base: VectorField
    region: Box
    growth_const: float
    lyapunov_const: float
    v_floor: float
    recipe: str
    quad_coeff: float | None = None
    extras: dict = field(default_factory=dict)

    def g(self, x, t: float = 0.0):
        """Closeness weight |b - b_k| sqrt(V_k)."""
        x = np.asarray(x, dtype=float)
        if self.base.d == 1:
            diff = np.abs(np.asarray(self.base(x, t)) - np.asarray(self.b_k(x, t)))
            return diff * np.sqrt(np.asarray(self.V(x)))
        diff = np.linalg.norm(np.asarray(self.base(x, t)) - np.asarray(self.b_k(x, t)), axis=-1)
        return diff * np.sqrt(np.asarray(self.V(x)))

    def check_positivity(self, n: int = 512) -> float:
        """min of V_k on a region sample grid; must stay above the recorded floor."""
        xs = _region_grid(self.region, n)
        v = np.asarray([self.V(x) for x in xs]) if self.base.d > 1 else np.asarray(self.V(xs))
        return float(np.min(v))

    def check_v_gradient(self, rng: np.random.Generator, n: int = 20) -> float:
        """Worst relative deviation of V_grad from central differences."""
        worst = 0.0
        for _ in range(n):
            x = rng.uniform(self.region.lo, self.region.hi)
            if self.base.d == 1:
                x0 = float(x[0])
                h = 1e-4 * (1.0 + abs(x0))
                fd = (self.V(x0 + h) - self.V(x0 - h)) / (2 * h)
                gr = self.V_grad(x0)
                worst = max(worst, abs(fd - gr) / max(abs(gr), abs(fd), 1e-9))
            else:
                g = np.asarray(self.V_grad(x), dtype=float)
                for i in range(self.base.d):
                    e = np.zeros(self.base.d)
                    e[i] = 1e-4 * (1.0 + abs(x[i]))
                    fd = (self.V(x + e) - self.V(x - e)) / (2 * e[i])
                    worst = max(worst, abs(fd - g[i]) / max(abs(g[i]), abs(fd), 1e-9))
        return worst


def _region_grid(region: Box, n: int) -> np.ndarray:
    if region.d == 1:
        return np.linspace(region.lo[0], region.hi[0], n)
    axes = [np.linspace(region.lo[i], region.hi[i], max(2, int(round(n ** (1.0 / region.d)))))
            for i in range(region.d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _const_field(c: float) -> SmoothField:
    return SmoothField(1, lambda x, t=0.0: np.full_like(np.asarray(x, dtype=float), c),
                       lambda x, t=0.0: np.zeros_like(np.asarray(x, dtype=float)),
                       name="const:%g" % c, growth_const=abs(c))


def corollary1_pair(b: VectorField, k: int, interval: tuple[float, float],
                    rho: Mollifier | None = None, samples: int = 1025) -> ApproximationPair:
    """Nonnegative-drift recipe: b_k = b * rho_{1/k} + omega(1/k), V_k = b_k^{-2}.

    For constant b the mollification is skipped and V_k = 1 (the drift needs no
    smoothing and the weight inequality is trivial).
    """
    if b.d != 1:
        raise ValueError("this recipe is one-dimensional")
    rho = rho or cos2_mollifier()
    lo, hi = float(interval[0]), float(interval[1])
    enlarged = (lo - 1.0, hi + 1.0)
    xs = np.linspace(enlarged[0], enlarged[1], samples)
    vals = np.asarray(b(xs, 0.0), dtype=float)
    if np.any(vals < -1e-12):
        raise ValueError("Corollary 1 requires b >= 0 (apply mirror or Corollary 2)")
    growth_c = float(np.max(vals / (1.0 + np.abs(xs))))
    region = Box.interval(lo, hi)
    omega = modulus_of_continuity(b, enlarged, 1.0 / k)
    if omega == 0.0:
        c = float(vals[0])
        pair = ApproximationPair(
            k=k, b_k=_const_field(c),
            V=lambda x: np.ones_like(np.asarray(x, dtype=float)),
            V_grad=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            base=b, region=region, growth_const=max(2.0 * growth_c, abs(c)),
            lyapunov_const=0.0, v_floor=1.0, recipe="corollary1/const")
        return pair
    conv = mollify(b, rho, k, domain=enlarged)

    def b_k_val(x, t=0.0):
        return conv(x, t) + omega

    b_k = SmoothField(1, b_k_val, conv.jac, name="cor1[k=%d](%s)" % (k, b.name or "b"),
                      growth_const=2.0 * growth_c if growth_c > 0 else omega)

    def V(x):
        return np.asarray(b_k_val(x)) ** -2.0

    def V_grad(x):
        bk = np.asarray(b_k_val(x))
        return -2.0 * np.asarray(conv.jac(x)) * bk ** -3.0

    c_n = float(np.max(vals))
    floor = (4.0 * c_n) ** -2.0 if c_n > 0 else omega ** -2.0
    pair = ApproximationPair(k=k, b_k=b_k, V=V, V_grad=V_grad, base=b, region=region,
                             growth_const=b_k.growth_const, lyapunov_const=0.0,
                             v_floor=floor, recipe="corollary1",
                             extras={"omega": omega, "max_b": c_n})
    _assert_shift_dominates(b, b_k, region)
    return pair


def _assert_shift_dominates(b, b_k, region, n: int = 101):
    # diagnostic from the recipe: smoothed-and-shifted field must dominate b
    xs = np.linspace(region.lo[0], region.hi[0], n)
    bk = np.asarray([float(b_k(float(x))) for x in xs])
    bv = np.asarray(b(xs, 0.0), dtype=float)
    if np.any(bk < bv - 1e-9):
        raise RuntimeError("modulus shift failed to dominate the field on the sample grid")


def sqrt_pair(k: int, region: Box | tuple[float, float] = (-2.0, 2.0)) -> ApproximationPair:
    """Analytic pair for b(x) = sqrt(|x|): b_k = (x^2 + k^-2)^(1/4), V_k = b_k^-2."""
    if not isinstance(region, Box):
        region = Box.interval(*region)
    k2 = float(k) ** -2.0

    def b_k_val(x, t=0.0):
        x = np.asarray(x, dtype=float)
        return (x * x + k2) ** 0.25

    def b_k_der(x, t=0.0):
        x = np.asarray(x, dtype=float)
        return x / (2.0 * (x * x + k2) ** 0.75)

    def V(x):
        x = np.asarray(x, dtype=float)
        return (x * x + k2) ** -0.5

    def V_grad(x):
        x = np.asarray(x, dtype=float)
        return -x * (x * x + k2) ** -1.5

    base = VectorField(1, lambda x, t=0.0: np.sqrt(np.abs(np.asarray(x, dtype=float))),
                       name="sqrt_abs", growth_const=1.0)
    b_k = SmoothField(1, b_k_val, b_k_der, name="sqrt_pair[k=%d]" % k, growth_const=1.0)
    r = float(max(abs(region.lo[0]), abs(region.hi[0])))
    floor = (r * r + 1.0) ** -0.5  # k-uniform: worst shift is k = 1
    return ApproximationPair(k=k, b_k=b_k, V=V, V_grad=V_grad, base=base, region=region,
                             growth_const=1.0, lyapunov_const=0.0, v_floor=floor,
                             recipe="sqrt_analytic")


def _dist_to_complement(intervals: list[tuple[float, float]],
                        ext_left: bool, ext_right: bool) -> Callable:
    """h(x) = dist(x, complement of the open interval union); 1-Lipschitz, >= 0."""
    ivs = []
    for idx, (lo, hi) in enumerate(intervals):
        if hi <= lo:
            continue
        a = -np.inf if (ext_left and idx == 0) else lo
        b = np.inf if (ext_right and idx == len(intervals) - 1) else hi
        ivs.append((a, b))

    def h(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for a, b in ivs:
            inside = (x > a) & (x < b)
            out = np.where(inside, np.minimum(x - a, b - x), out)
        return out

    return h


def corollary2_pair(dec: FieldDecomposition, k: int, interval: tuple[float, float],
                    rho: Mollifier | None = None) -> ApproximationPair:
    """Lipschitz-plus-nonnegative recipe with the 1-Lipschitz auxiliary h.

    b_k = (g~ + f~_k) * rho_{1/k} + eps_k,  V_k = (|g~| * rho + f~_k * rho + eps_k)^-2
    with g~ = g - h, f~_k = (f - 2 omega(3/k))^+ + h and eps_k = 8 Lambda k^{-1/2}.
    """
    rho = rho or cos2_mollifier()
    lo, hi = float(interval[0]), float(interval[1])
    dec.check((lo - 1.0, hi + 1.0))
    lam = dec.lipschitz_const
    enlarged = (lo - 1.0, hi + 1.0)
    b = dec.field()
    xs = np.linspace(enlarged[0], enlarged[1], 1025)
    bvals = np.asarray(b(xs, 0.0), dtype=float)
    growth_c = float(np.max(np.abs(bvals) / (1.0 + np.abs(xs))))

    zf = zero_set(dec.f, enlarged)
    h = _dist_to_complement(zf.intervals, zf.extended_left, zf.extended_right)
    omega_f = modulus_of_continuity(dec.f, enlarged, min(3.0 / k, enlarged[1] - enlarged[0]))
    eps_k = 8.0 * lam * k ** -0.5

    g_t = lambda x: np.asarray(dec.g(np.asarray(x, dtype=float))) - h(x)
    f_tk = lambda x: np.maximum(np.asarray(dec.f(np.asarray(x, dtype=float))) - 2.0 * omega_f, 0.0) + h(x)
    abs_g_t = lambda x: np.abs(g_t(x))
    sum_gt_ftk = lambda x: g_t(x) + f_tk(x)

    conv_sum = mollify(VectorField(1, lambda x, t=0.0: sum_gt_ftk(x)), rho, k, domain=enlarged)
    conv_abs_g = mollify(VectorField(1, lambda x, t=0.0: abs_g_t(x)), rho, k, domain=enlarged)
    conv_f = mollify(VectorField(1, lambda x, t=0.0: f_tk(x)), rho, k, domain=enlarged)

    def b_k_val(x, t=0.0):
        return conv_sum(x) + eps_k

    def denom(x):
        return np.asarray(conv_abs_g(x)) + np.asarray(conv_f(x)) + eps_k

    def V(x):
        return denom(x) ** -2.0

    def V_grad(x):
        return -2.0 * denom(x) ** -3.0 * (np.asarray(conv_abs_g.jac(x)) + np.asarray(conv_f.jac(x)))

    def ratio(x):
        """The bounded quotient controlling the weight inequality; |ratio| <= 2(Lambda+1)."""
        neg_part = np.asarray(conv_sum(x)) - np.asarray(conv_abs_g(x)) - np.asarray(conv_f(x))
        return neg_part * (np.asarray(conv_abs_g.jac(x)) + np.asarray(conv_f.jac(x))) / denom(x)

    b_k = SmoothField(1, b_k_val, conv_sum.jac, name="cor2[k=%d]" % k,
                      growth_const=2.0 * growth_c + eps_k)
    # k-uniform floor: denominator <= max(|g~|) + max(f~) + eps_1 on the window
    hmax = float(np.max(h(xs)))
    cap = float(np.max(np.abs(g_t(xs)))) + float(np.max(f_tk(xs))) + 8.0 * lam + 1e-300
    pair = ApproximationPair(
        k=k, b_k=b_k, V=V, V_grad=V_grad, base=b, region=Box.interval(lo, hi),
        growth_const=b_k.growth_const, lyapunov_const=8.0 * (lam + 1.0),
        v_floor=cap ** -2.0, recipe="corollary2",
        extras={"eps_k": eps_k, "omega_f": omega_f, "ratio": ratio, "h": h,
                "f_tilde": lambda x: np.asarray(dec.f(np.asarray(x, dtype=float))) + h(x),
                "lambda": lam, "h_max": hmax})
    return pair


def radial_pair(beta: Callable, k: int, N: float, d: int, lam_n1: float,
                rho: Mollifier | None = None, variant: str = "radial",
                potential=None) -> ApproximationPair:
    """Radially symmetric recipe b_k = -(beta_k(|x|^2) + omega(1/k)) x on {|x| <= sqrt(N)}.

    variant="potential" uses b = -beta(W(x)) grad W(x) with `potential` carrying
    (W, grad_W, hess_W) callables.
    """
    rho = rho or cos2_mollifier()
    s_hi = float(N) + 1.0
    xs = np.linspace(0.0, s_hi, 1025)
    bvals = np.asarray(beta(xs), dtype=float)
    if np.any(bvals < -1e-12):
        raise ValueError("beta must be nonnegative")
    beta_max = float(np.max(bvals))

    # constant extension below 0 keeps the mollified slope bounded by Lambda
    def beta_ext(s, t=0.0):
        s = np.asarray(s, dtype=float)
        return np.asarray(beta(np.maximum(s, 0.0)))

    omega = modulus_of_continuity(beta_ext, (-1.0, s_hi), 1.0 / k)
    region = Box.cube(math.sqrt(N / d), d)  # inscribed in the ball |x|^2 <= N
    base = radial_field(beta, d, name="radial(beta)")
    if variant == "potential":
        if potential is None:
            raise ValueError("potential variant needs (W, grad_W, hess_W)")
        W, gW, hW = potential
        base = VectorField(d, lambda x, t=0.0: -np.asarray(beta(W(x))) * np.asarray(gW(x)),
                           name="potential(beta,W)", vectorized=False)

    if omega == 0.0:
        c = float(bvals[0])
        if variant == "radial":
            def fn(x, t=0.0):
                return -c * np.asarray(x, dtype=float)

            def jac(x, t=0.0):
                return -c * np.eye(d) if d > 1 else -c
        else:
            W, gW, hW = potential

            def fn(x, t=0.0):
                return -c * np.asarray(gW(x), dtype=float)

            def jac(x, t=0.0):
                return -c * np.asarray(hW(x), dtype=float)

        b_k = SmoothField(d, fn, jac, name="radial/const", vectorized=(variant == "radial"))
        return ApproximationPair(k=k, b_k=b_k,
                                 V=lambda x: 1.0, V_grad=lambda x: np.zeros(d) if d > 1 else 0.0,
                                 base=base, region=region,
                                 growth_const=max(c * (1.0 + math.sqrt(N)), 1e-12),
                                 lyapunov_const=0.0, v_floor=1.0, recipe="radial/const")
    conv = mollify(VectorField(1, beta_ext), rho, k, domain=(-1.0, s_hi))
    shift = omega

    if variant == "radial":
        def a(x):
            x = np.asarray(x, dtype=float)
            r2 = float(np.dot(x, x)) if d > 1 else float(x * x)
            return float(conv(r2)) + shift

        def a_der(x):
            x = np.asarray(x, dtype=float)
            r2 = float(np.dot(x, x)) if d > 1 else float(x * x)
            return float(conv.jac(r2))

        def fn(x, t=0.0):
            return -a(x) * np.asarray(x, dtype=float)

        def jac(x, t=0.0):
            x = np.asarray(x, dtype=float)
            if d == 1:
                return -2.0 * a_der(x) * float(x) ** 2 - a(x)
            return -2.0 * a_der(x) * np.outer(x, x) - a(x) * np.eye(d)

        def V(x):
            return a(x) ** -2.0

        def V_grad(x):
            x = np.asarray(x, dtype=float)
            return -4.0 * a_der(x) * x * a(x) ** -3.0

        recipe = "radial"
    else:
        W, gW, hW = potential

        def a(x):
            return float(conv(float(W(x)))) + shift

        def a_der(x):
            return float(conv.jac(float(W(x))))

        def fn(x, t=0.0):
            return -a(x) * np.asarray(gW(x), dtype=float)

        def jac(x, t=0.0):
            g = np.asarray(gW(x), dtype=float)
            H = np.asarray(hW(x), dtype=float)
            return -a_der(x) * np.outer(g, g) - a(x) * H

        def V(x):
            return a(x) ** -2.0

        def V_grad(x):
            return -2.0 * a(x) ** -3.0 * a_der(x) * np.asarray(gW(x), dtype=float)

        recipe = "radial/potential"

    b_k = SmoothField(d, fn, jac, name="%s[k=%d]" % (recipe, k), vectorized=False)
    growth = (beta_max + shift) * (1.0 + math.sqrt(N))
    c2 = 4.0 * N * lam_n1 if variant == "radial" else 2.0 * lam_n1
    floor = (beta_max + modulus_of_continuity(beta_ext, (-1.0, s_hi), 1.0)) ** -2.0
    return ApproximationPair(k=k, b_k=b_k, V=V, V_grad=V_grad, base=base, region=region,
                             growth_const=growth, lyapunov_const=c2, v_floor=floor,
                             recipe=recipe, extras={"omega": omega, "beta_max": beta_max})


# ---------------------------------------------------------------------------
# condition checks and certificates
# ---------------------------------------------------------------------------

@dataclass
class ConditionMargins:
    """Worst-case slack of the growth and weight inequalities over a sample grid.

    Nonnegative slack means the condition holds there; negative slack is data.
    """

    growth: float
    lyapunov: float
    quadratic: float | None
    argmin_growth: float | np.ndarray | None = None
    argmin_lyapunov: float | np.ndarray | None = None

    def passed(self, tol: float = 1e-9) -> bool:
        ok = self.growth >= -tol and self.lyapunov >= -tol
        if self.quadratic is not None:
            ok = ok and self.quadratic >= -tol
        return ok


def _sym_eig_max(J) -> float:
    J = np.asarray(J, dtype=float)
    if J.ndim == 0:
        return float(J)
    S = 0.5 * (J + J.T)
    return float(np.max(np.linalg.eigvalsh(S)))


def check_conditions(pair: ApproximationPair, n_x: int = 201,
                     times: Sequence[float] = (0.0,)) -> ConditionMargins:
    """Evaluate hypothesis slacks on a region x time sample grid."""
    xs = _region_grid(pair.region, n_x)
    growth = np.inf
    lyap = np.inf
    quad_m = np.inf if pair.quad_coeff is not None else None
    arg_g = arg_l = None
    for t in times:
        for x in xs:
            xq = float(x) if pair.base.d == 1 and np.ndim(x) == 0 else x
            bk = np.atleast_1d(np.asarray(pair.b_k(xq, t), dtype=float))
            vk = float(pair.V(xq))
            gv = np.atleast_1d(np.asarray(pair.V_grad(xq), dtype=float))
            lam_max = _sym_eig_max(pair.b_k.jac(xq, t))
            norm_x = abs(xq) if pair.base.d == 1 else float(np.linalg.norm(x))
            g_slack = pair.growth_const + pair.growth_const * norm_x - float(np.linalg.norm(bk))
            lhs = float(np.dot(bk, gv))
            l_slack = (pair.lyapunov_const - 2.0 * lam_max) * vk - lhs
            if g_slack < growth:
                growth, arg_g = g_slack, xq
            if l_slack < lyap:
                lyap, arg_l = l_slack, xq
            if quad_m is not None:
                q_slack = (pair.lyapunov_const - pair.quad_coeff * float(np.dot(bk, bk))
                           - 2.0 * lam_max) * vk - lhs
                quad_m = min(quad_m, q_slack)
    return ConditionMargins(float(growth), float(lyap),
                            None if quad_m is None else float(quad_m), arg_g, arg_l)


@dataclass
class Certificate:
    """Closeness functional J_k per k, hypothesis margins and the verdict."""

    ks: list[int]
    J: dict[int, float]
    margins: dict[int, ConditionMargins]
    boundary_mass: float
    verdict: str
    threshold: float
    region: tuple[float, float] | None = None

    def to_json_dict(self) -> dict:
        return {
            "recipe": None,
            "ks": self.ks,
            "J": [self.J[k] for k in self.ks],
            "margins": {str(k): {"growth": m.growth, "lyapunov": m.lyapunov,
                                 "quadratic": m.quadratic}
                        for k, m in self.margins.items()},
            "boundary_mass": self.boundary_mass,
            "verdict": self.verdict,
            "threshold": self.threshold,
        }


DEFAULT_KS = (10, 100, 1000, 10000)


def certificate(path: MeasurePath, b: VectorField, pairs: Sequence[ApproximationPair],
                region: Box, threshold: float = 0.05,
                margin_tol: float = 1e-9, margin_grid_n: int = 101) -> Certificate:
    """Evaluate J_k = || (b_k - b) sqrt(V_k) ||_{L1(|mu_t| dt)} over the region.

    Verdict: certified when all margins pass, the J tail is non-increasing and
    the terminal J is below the threshold; rejected when J plateaus at or above
    the threshold; inconclusive otherwise.
    """
    if path.d != b.d:
        raise ValueError("path and field dimensions do not match")
    for pair in pairs:
        if pair.base.d != path.d:
            raise ValueError("pair and path dimensions do not match")
    abs_path = path.abs()
    ks = [p.k for p in pairs]
    J: dict[int, float] = {}
    margins: dict[int, ConditionMargins] = {}
    for pair in sorted(pairs, key=lambda p: p.k):
        J[pair.k] = path_integrate(abs_path, lambda x, t, _p=pair: _p.g(x, t), region=region)
        margins[pair.k] = check_conditions(pair, n_x=margin_grid_n)
    boundary_mass = 0.0
    if b.d == 1:
        z = zero_set(b, (float(region.lo[0]), float(region.hi[0])))
        for p0 in z.boundary:
            nb = Box.interval(p0 - z.eta, p0 + z.eta)
            vals = [total_variation(s, nb) for s in abs_path.slices[:-1]]
            boundary_mass += abs_path.dt * float(math.fsum(vals))
    js = [J[k] for k in sorted(ks)]
    tail = js[-3:] if len(js) >= 3 else js
    nonincreasing = all(a >= b_ - 1e-12 for a, b_ in zip(tail, tail[1:]))
    strictly_decreasing = all(a > b_ + 1e-12 for a, b_ in zip(tail, tail[1:]))
    all_margins = all(m.passed(margin_tol) for m in margins.values())
    terminal = js[-1]
    if all_margins and nonincreasing and terminal < threshold:
        verdict = "certified"
    elif terminal >= threshold and not strictly_decreasing:
        verdict = "rejected"
    else:
        verdict = "inconclusive"
    return Certificate(sorted(ks), J, margins, boundary_mass, verdict, threshold,
                       region=(float(region.lo[0]), float(region.hi[0])) if b.d == 1 else None)
