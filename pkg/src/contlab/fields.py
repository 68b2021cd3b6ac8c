"""Drift fields b(x, t): catalog, moduli of continuity, mollification, mirror.

1D fields evaluate on scalars and numpy arrays alike; d >= 2 fields take and
return length-d vectors (batched as (n, d) when vectorized).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .measures import Box


class VectorField:
    """Evaluable drift b(x, t) with dimension and optional growth metadata."""

    def __init__(self, d: int, fn: Callable, name: str | None = None,
                 growth_const: float | None = None, vectorized: bool = True):
        self.d = int(d)
        self._fn = fn
        self.name = name
        self.growth_const = growth_const
        self.vectorized = vectorized

    def __call__(self, x, t: float = 0.0):
        return self._fn(x, t)

    def many(self, xs: np.ndarray, t: float = 0.0) -> np.ndarray:
        """Batch evaluation: xs of shape (n,) for d=1 or (n, d) for d >= 2."""
        xs = np.asarray(xs, dtype=float)
        if self.vectorized:
            return np.asarray(self._fn(xs, t), dtype=float)
        if self.d == 1:
            return np.asarray([self._fn(float(x), t) for x in xs], dtype=float)
        return np.asarray([self._fn(x, t) for x in xs], dtype=float)

    def check_growth(self, region: Box, rng: np.random.Generator, n: int = 200) -> float:
        """Worst slack of |b| <= C1 + C1|x| on random samples (>= 0 means ok)."""
        if self.growth_const is None:
            raise ValueError("field declares no growth constant")
        c1 = self.growth_const
        worst = np.inf
        for _ in range(n):
            x = rng.uniform(region.lo, region.hi)
            t = rng.uniform(0.0, 1.0)
            xv = float(x[0]) if self.d == 1 else x
            b = np.atleast_1d(self(xv, t))
            worst = min(worst, c1 + c1 * float(np.linalg.norm(x)) - float(np.linalg.norm(b)))
        return float(worst)


class SmoothField(VectorField):
    """VectorField with spatial Jacobian access (d x d, scalar for d = 1)."""

    def __init__(self, d: int, fn: Callable, jac: Callable, name: str | None = None,
                 growth_const: float | None = None, vectorized: bool = True):
        super().__init__(d, fn, name, growth_const, vectorized)
        self._jac = jac

    def jac(self, x, t: float = 0.0):
        return self._jac(x, t)

    def check_jacobian(self, region: Box, rng: np.random.Generator, n: int = 20,
                       rel_tol: float = 1e-5) -> float:
        """Worst relative deviation of the Jacobian from central differences."""
        worst = 0.0
        for _ in range(n):
            x = rng.uniform(region.lo, region.hi)
            t = rng.uniform(0.0, 1.0)
            if self.d == 1:
                h = 1e-4 * (1.0 + abs(float(x[0])))
                fd = (self(float(x[0]) + h, t) - self(float(x[0]) - h, t)) / (2 * h)
                j = self.jac(float(x[0]), t)
                worst = max(worst, abs(fd - j) / max(abs(j), abs(fd), 1e-7))
            else:
                J = np.asarray(self.jac(x, t), dtype=float)
                for i in range(self.d):
                    e = np.zeros(self.d)
                    e[i] = 1e-4 * (1.0 + abs(x[i]))
                    fd = (np.asarray(self(x + e, t)) - np.asarray(self(x - e, t))) / (2 * e[i])
                    scale = max(np.max(np.abs(J[i])), np.max(np.abs(fd)), 1e-7)
                    worst = max(worst, float(np.max(np.abs(fd - J[i, :]))) / scale)
        return worst


@dataclass(frozen=True)
class Mollifier:
    """Even nonnegative bump on [-1, 1] with unit integral; rho_{1/k}(x) = k rho(kx)."""

    profile: Callable
    derivative: Callable

    def mass(self) -> float:
        return quad(self.profile, -1.0, 1.0, epsabs=1e-12)[0]

    def scaled(self, k: int) -> Callable:
        return lambda x: k * self.profile(k * np.asarray(x))


def cos2_mollifier() -> Mollifier:
    """Default bump (1 + cos(pi x))/2 on [-1, 1]; unit mass in closed form."""

    def rho(u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) < 1.0, 0.5 * (1.0 + np.cos(np.pi * u)), 0.0)

    def drho(u):
        u = np.asarray(u, dtype=float)
        return np.where(np.abs(u) < 1.0, -0.5 * np.pi * np.sin(np.pi * u), 0.0)

    return Mollifier(rho, drho)


def modulus_of_continuity(b: VectorField | Callable, interval: tuple[float, float],
                          delta: float) -> float:
    """Safe over-estimate of the modulus of continuity on the interval.

    1.1 * max over a grid of spacing <= delta/16 of |b(x) - b(y)| for |x - y| <= delta.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if delta <= 0 or delta > hi - lo:
        raise ValueError("need 0 < delta <= interval width")
    spacing = delta / 16.0
    n = int(np.ceil((hi - lo) / spacing)) + 1
    xs = np.linspace(lo, hi, n)
    fn = b if not isinstance(b, VectorField) else (lambda x: b(x, 0.0))
    vals = np.asarray(fn(xs), dtype=float)
    if vals.shape != xs.shape:
        vals = np.asarray([float(fn(float(x))) for x in xs])
    if not np.all(np.isfinite(vals)):
        raise ValueError("field samples are not finite on the interval")
    w = int(np.floor(delta / (xs[1] - xs[0]) * (1.0 + 1e-9)))
    size = w + 1
    mx = maximum_filter1d(vals, size=size, mode="nearest")
    mn = minimum_filter1d(vals, size=size, mode="nearest")
    return 1.1 * float(np.max(mx - mn))


def mollify(b: VectorField, rho: Mollifier, k: int,
            domain: tuple[float, float] | None = None) -> SmoothField:
    """Convolution b * rho_{1/k} with derivative b * rho'_{1/k} (no finite differences).

    Adaptive quadrature at absolute tolerance 1e-10.  The field must be
    evaluable on the domain enlarged by 1/k.
    """
    if b.d != 1:
        raise ValueError("mollification is implemented for d = 1")
    if k < 1:
        raise ValueError("mollifier scale k must be a positive integer")

    def _check(x):
        if domain is not None and not (domain[0] - 1e-12 <= x <= domain[1] + 1e-12):
            raise ValueError("mollified field evaluated outside its domain")

    def val(x, t=0.0):
        xs = np.asarray(x, dtype=float)
        if xs.ndim == 0:
            _check(float(xs))
            return quad(lambda u: float(b(float(xs) - u / k, t)) * rho.profile(u),
                        -1.0, 1.0, epsabs=1e-10, limit=200)[0]
        return np.asarray([val(float(xi), t) for xi in xs])

    def der(x, t=0.0):
        xs = np.asarray(x, dtype=float)
        if xs.ndim == 0:
            _check(float(xs))
            return k * quad(lambda u: float(b(float(xs) - u / k, t)) * rho.derivative(u),
                            -1.0, 1.0, epsabs=1e-10, limit=200)[0]
        return np.asarray([der(float(xi), t) for xi in xs])

    name = "%s*rho_{1/%d}" % (b.name or "b", k)
    return SmoothField(1, val, der, name=name, growth_const=b.growth_const,
                       vectorized=True)


def mirror(b: VectorField) -> VectorField:
    """x -> -b(-x, t); applying twice recovers the field pointwise."""
    if b.d != 1:
        raise ValueError("mirror is a 1D transform")
    out = VectorField(1, lambda x, t=0.0: -b(-np.asarray(x, dtype=float), t),
                      name="mirror(%s)" % (b.name or "b"),
                      growth_const=b.growth_const, vectorized=b.vectorized)
    return out


@dataclass
class OneSidedEstimate:
    value: float
    samples: int
    unbounded: bool


def one_sided_constant(b: VectorField, region: Box, samples: int = 2000,
                       seed: int = 7, times=(0.0,)) -> OneSidedEstimate:
    """Empirical one-sided Lipschitz constant: max <b(x+xi,t)-b(x,t), xi>/|xi|^2.

    An estimate, not a certificate.  Flagged unbounded when the estimate keeps
    growing as |xi| is refined toward zero.
    """
    rng = np.random.default_rng(seed)
    scale = float(np.max(region.width()))
    tiers = [10.0 ** (-p) * scale for p in range(1, 7)]
    per_tier = max(samples // len(tiers), 1)
    tier_max = []
    for eps in tiers:
        best = -np.inf
        for _ in range(per_tier):
            x = rng.uniform(region.lo, region.hi)
            xi = rng.normal(size=b.d)
            xi *= eps / np.linalg.norm(xi)
            t = float(rng.choice(times))
            if b.d == 1:
                num = (float(b(float(x[0] + xi[0]), t)) - float(b(float(x[0]), t))) * xi[0]
            else:
                num = float(np.dot(np.asarray(b(x + xi, t)) - np.asarray(b(x, t)), xi))
            best = max(best, num / eps ** 2)
        tier_max.append(best)
    value = max(tier_max)
    # blow-up heuristic: smallest-xi tier dominates the largest-xi tier by 4x
    base = max(abs(tier_max[0]), 1e-12)
    unbounded = tier_max[-1] > 4.0 * base and tier_max[-1] > tier_max[0] + 1.0
    return OneSidedEstimate(float(value), per_tier * len(tiers), bool(unbounded))


class FieldDecomposition:
    """b = g + f with f >= 0 continuous and g Lipschitz; g < 0 forces f = 0."""

    def __init__(self, g: Callable, f: Callable, lipschitz_const: float):
        self.g = g
        self.f = f
        self.lipschitz_const = float(lipschitz_const)

    def field(self, name: str = "g+f") -> VectorField:
        return VectorField(1, lambda x, t=0.0: self.g(np.asarray(x, dtype=float))
                           + self.f(np.asarray(x, dtype=float)), name=name)

    def check(self, interval: tuple[float, float], n: int = 2001) -> None:
        """Sampled hypothesis check; raises naming the violated condition."""
        xs = np.linspace(interval[0], interval[1], n)
        g = np.asarray(self.g(xs), dtype=float)
        f = np.asarray(self.f(xs), dtype=float)
        if np.any(f < -1e-12):
            raise ValueError("decomposition check failed: f must be nonnegative")
        if np.any((g < -1e-12) & (f > 1e-12)):
            raise ValueError("decomposition check failed: g(x) < 0 must force f(x) = 0")
        slopes = np.abs(np.diff(g)) / np.diff(xs)
        if np.any(slopes > self.lipschitz_const * (1.0 + 1e-8) + 1e-12):
            raise ValueError("decomposition check failed: g exceeds its Lipschitz constant")


# ---------------------------------------------------------------------------
# field catalog
# ---------------------------------------------------------------------------

BETA_PROFILES: dict[str, tuple[Callable, float]] = {
    # name -> (beta(s), semiconvexity constant Lambda valid on every [0, N])
    "one": (lambda s: np.ones_like(np.asarray(s, dtype=float)), 1e-12),
    "clipped_linear": (lambda s: np.minimum(np.asarray(s, dtype=float), 1.0), 1.0),
}


def radial_field(beta: Callable, d: int, name: str | None = None) -> VectorField:
    """b(x) = -beta(|x|^2) x in dimension d."""

    def fn(x, t=0.0):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1) if x.ndim > 0 and x.shape[-1] == d and d > 1 else x * x
        if d == 1:
            return -np.asarray(beta(x * x)) * x
        return -np.asarray(beta(r2))[..., None] * x

    return VectorField(d, fn, name=name, vectorized=True)


def table_field(path: str) -> VectorField:
    """1D field from a CSV of (x, value) samples; linear interpolation, clamped ends."""
    data = np.loadtxt(path, delimiter=",", ndmin=2)
    xs, vs = data[:, 0], data[:, 1]
    order = np.argsort(xs)
    xs, vs = xs[order], vs[order]
    return VectorField(1, lambda x, t=0.0: np.interp(np.asarray(x, dtype=float), xs, vs),
                       name="custom_table", vectorized=True)


def resolve_field(spec: str, d: int = 1) -> VectorField:
    """Catalog lookup: sqrt_abs, const:<c>, linear:<a>, radial_beta:<name>, custom_table:<file>."""
    if spec == "sqrt_abs":
        return VectorField(1, lambda x, t=0.0: np.sqrt(np.abs(np.asarray(x, dtype=float))),
                           name="sqrt_abs", growth_const=1.0)
    if spec.startswith("const:"):
        c = float(spec.split(":", 1)[1])
        return VectorField(1, lambda x, t=0.0: np.full_like(np.asarray(x, dtype=float), c),
                           name=spec, growth_const=abs(c))
    if spec.startswith("linear:"):
        a = float(spec.split(":", 1)[1])
        return VectorField(1, lambda x, t=0.0: a * np.asarray(x, dtype=float),
                           name=spec, growth_const=abs(a))
    if spec.startswith("radial_beta:"):
        key = spec.split(":", 1)[1]
        if key not in BETA_PROFILES:
            raise KeyError("unknown beta profile %r" % key)
        return radial_field(BETA_PROFILES[key][0], d=d, name=spec)
    if spec.startswith("custom_table:"):
        return table_field(spec.split(":", 1)[1])
    raise KeyError("unknown field %r" % spec)
