"""Zero sets, approximation-pair recipes, hypothesis margins, certificates."""
import numpy as np
import pytest

from contlab.certify import (ApproximationPair, certificate, check_conditions,
                             corollary1_pair, corollary2_pair, radial_pair,
                             split_stationary, sqrt_pair, zero_set)
from contlab.fields import FieldDecomposition, SmoothField, resolve_field
from contlab.measures import Box, MeasurePath, SignedMeasure, total_variation

SQRT = resolve_field("sqrt_abs")


# -- zero sets ---------------------------------------------------------------

def test_zero_set_sqrt_isolated_point():
    z = zero_set(SQRT, (-1, 1), eta=1e-9)
    assert len(z.intervals) == 1
    lo, hi = z.intervals[0]
    assert abs(lo) < 1e-8 and abs(hi) < 1e-8
    assert len(z.boundary) == 1 and abs(z.boundary[0]) < 1e-8
    assert z.interior_intervals() == []


def test_zero_set_ramp_interval():
    z = zero_set(lambda x: np.maximum(0.0, np.asarray(x, dtype=float) - 1.0), (0, 3))
    assert len(z.intervals) == 1
    lo, hi = z.intervals[0]
    assert lo == 0.0 and hi == pytest.approx(1.0, abs=1e-6)
    assert len(z.boundary) == 1 and z.boundary[0] == pytest.approx(1.0, abs=1e-6)
    assert z.extended_left and not z.extended_right


def test_zero_set_empty_and_bad_eta():
    assert zero_set(resolve_field("const:1"), (-1, 1)).is_empty()
    with pytest.raises(ValueError, match="eta"):
        zero_set(SQRT, (-1, 1), eta=0.0)


# -- stationary split --------------------------------------------------------

def test_split_point_zero_set_keeps_everything_in_remainder():
    z = zero_set(SQRT, (-1, 1))
    nu0, rem = split_stationary(SignedMeasure.dirac(0.0), z)
    assert nu0.mass() == 0.0
    assert rem.mass() == 1.0


def test_split_atom_interior_to_zero_set():
    z = zero_set(lambda x: np.maximum(0.0, np.abs(np.asarray(x, dtype=float)) - 1.0),
                 (-3, 3))
    nu0, rem = split_stationary(SignedMeasure.dirac(0.5), z)
    assert nu0.mass() == 1.0 and rem.mass() == 0.0


def test_split_density_exact_recombination():
    z = zero_set(lambda x: np.maximum(0.0, np.abs(np.asarray(x, dtype=float) - 0.5) - 0.5),
                 (-2, 3))  # zero set [0, 1]
    nu = SignedMeasure.uniform(-1.0, 2.0, 3.0, n=13)
    nu0, rem = split_stationary(nu, z)
    assert nu0.mass() == pytest.approx(1.0, abs=1e-6)
    assert rem.mass() == pytest.approx(2.0, abs=1e-6)
    back = nu0 + rem
    assert back.mass() == pytest.approx(3.0, abs=1e-12)
    for box in (Box.interval(-1, -0.2), Box.interval(0.1, 0.8), Box.interval(1.2, 2.0)):
        assert total_variation(back, box) == pytest.approx(total_variation(nu, box), abs=1e-12)


# -- sqrt pair ----------------------------------------------------------------

@pytest.mark.parametrize("k", [10, 100, 1000, 10000])
def test_sqrt_pair_g_at_zero_is_one(k):
    assert sqrt_pair(k).g(0.0) == pytest.approx(1.0, abs=1e-14)


def test_sqrt_pair_g_envelope_and_cap():
    xs = np.linspace(-2, 2, 401)
    for k in (10, 1000):
        p = sqrt_pair(k)
        g = np.asarray(p.g(xs))
        assert np.all(g <= 1.0 + 1e-12)
        nz = np.abs(xs) > 1e-12
        assert np.all(g[nz] <= k ** -0.5 / np.sqrt(np.abs(xs[nz])) + 1e-12)


def test_sqrt_pair_lyapunov_identity_exact():
    xs = np.linspace(-2, 2, 1001)
    for k in (10, 10000):
        p = sqrt_pair(k)
        lhs = np.asarray(p.b_k(xs)) * np.asarray(p.V_grad(xs))
        rhs = -2.0 * np.asarray(p.b_k.jac(xs)) * np.asarray(p.V(xs))
        denom = np.abs(np.asarray(p.b_k.jac(xs)) * np.asarray(p.V(xs)))
        assert np.all(np.abs(lhs - rhs) <= 1e-9 * denom + 1e-12)


def test_sqrt_pair_floor_holds():
    p = sqrt_pair(50, region=(-2, 2))
    assert p.check_positivity() >= p.v_floor


# -- corollary 1 --------------------------------------------------------------

def test_corollary1_constant_branch():
    p = corollary1_pair(resolve_field("const:1"), 10, (-2, 2))
    assert p.recipe == "corollary1/const"
    assert p.b_k(0.3) == pytest.approx(1.0)
    assert p.V(0.3) == pytest.approx(1.0)
    assert p.g(0.5) == pytest.approx(0.0, abs=1e-15)


def test_corollary1_zero_field_constant_branch():
    # constant drift (including zero) takes the V = 1 branch; the closeness
    # weight vanishes identically, so every path is certified
    p = corollary1_pair(resolve_field("const:0"), 10, (-1, 1))
    assert p.recipe == "corollary1/const"
    assert p.g(0.2) == 0.0


def test_corollary1_rejects_negative_field():
    with pytest.raises(ValueError, match="requires b >= 0"):
        corollary1_pair(resolve_field("linear:1"), 10, (-2, 2))


def test_corollary1_sqrt_bounds_and_identity():
    p = corollary1_pair(SQRT, 100, (-2, 2))
    xs = np.linspace(-2, 2, 41)
    g = np.asarray([float(p.g(float(x))) for x in xs])
    assert np.all(g <= 2.0 + 1e-9)
    omega = p.extras["omega"]
    for x in (0.0, 0.5, -1.2):
        bk = float(p.b_k(x))
        conv = bk - omega
        expected_cap = 2.0 * omega / (conv + omega)
        if SQRT(x) > 0:
            assert float(p.g(x)) <= expected_cap + 1e-9
        ident = bk * float(p.V_grad(x)) + 2.0 * float(p.b_k.jac(x)) * float(p.V(x))
        assert abs(ident) <= 1e-9 * abs(float(p.b_k.jac(x)) * float(p.V(x))) + 1e-12
    assert p.check_positivity(129) >= p.v_floor - 1e-15


def test_corollary1_v_gradient_matches_differences():
    p = corollary1_pair(SQRT, 20, (-2, 2))
    rng = np.random.default_rng(1)
    assert p.check_v_gradient(rng, n=8) < 1e-6


# -- corollary 2 --------------------------------------------------------------

@pytest.fixture(scope="module")
def demo_dec():
    return FieldDecomposition(
        lambda x: -np.minimum(np.asarray(x, dtype=float), 0.0),
        lambda x: np.maximum(np.asarray(x, dtype=float) - 1.0, 0.0), 1.0)


def test_corollary2_ratio_bound(demo_dec):
    for k in (100, 10000):
        p = corollary2_pair(demo_dec, k, (-2, 3))
        ratio = p.extras["ratio"]
        vals = [abs(float(ratio(float(x)))) for x in np.linspace(-2, 3, 81)]
        assert max(vals) <= 2.0 * (demo_dec.lipschitz_const + 1.0) + 1e-9


def test_corollary2_boundary_point_converges_to_one(demo_dec):
    # at the augmented zero point the weight sits within Lambda/(k eps_k) of 1
    for k in (100, 10000):
        p = corollary2_pair(demo_dec, k, (-2, 3))
        slack = demo_dec.lipschitz_const / (k * p.extras["eps_k"])
        assert abs(float(p.g(1.0)) - 1.0) <= slack + 1e-3


def test_corollary2_positive_f_tilde_decays(demo_dec):
    vals = [float(corollary2_pair(demo_dec, k, (-2, 3)).g(2.0)) for k in (10, 100, 10000)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 0.1


def test_corollary2_specializes_to_corollary1_shape():
    # g = 0, f = b >= 0: same decay as the nonnegative-drift recipe where f > 0
    f = lambda x: np.maximum(np.asarray(x, dtype=float), 0.0)
    dec = FieldDecomposition(lambda x: np.zeros_like(np.asarray(x, dtype=float)), f, 1.0)
    p2 = corollary2_pair(dec, 10000, (-2, 2))
    p1 = corollary1_pair(dec.field(), 10000, (-2, 2))
    for x in (0.5, 1.0, 1.5):
        assert float(p2.g(x)) < 0.25
        assert float(p1.g(x)) < 0.25
    seq = [float(corollary2_pair(dec, k, (-2, 2)).g(1.0)) for k in (10, 1000)]
    assert seq[0] > seq[1]


def test_corollary2_decomposition_check_failure():
    bad = FieldDecomposition(lambda x: -np.asarray(x, dtype=float),
                             lambda x: np.ones_like(np.asarray(x, dtype=float)), 1.0)
    with pytest.raises(ValueError, match="decomposition check failed"):
        corollary2_pair(bad, 10, (-2, 2))


# -- radial -------------------------------------------------------------------

def test_radial_constant_profile():
    p = radial_pair(lambda s: np.ones_like(np.asarray(s, dtype=float)), 10,
                    N=4.0, d=2, lam_n1=1e-12)
    x = np.array([1.0, 0.0])
    assert np.allclose(p.b_k(x), [-1.0, 0.0])
    assert np.allclose(p.b_k.jac(x), -np.eye(2))
    assert p.V(x) == pytest.approx(1.0)


def test_radial_weight_is_abs_x_on_zero_region():
    # beta(s) = (s - 1)^+ vanishes for |x| <= 1: there the weight equals |x|,
    # so it is exactly 1 on the unit circle
    beta = lambda s: np.maximum(np.asarray(s, dtype=float) - 1.0, 0.0)
    p = radial_pair(beta, 200, N=4.0, d=2, lam_n1=1.0)
    on_circle = np.array([1.0, 0.0])
    assert float(p.g(on_circle)) == pytest.approx(1.0, abs=1e-9)
    inside = np.array([0.5, 0.0])
    assert float(p.g(inside)) == pytest.approx(0.5, abs=1e-9)


def test_radial_g_bounded_by_twice_radius():
    beta = lambda s: np.minimum(np.asarray(s, dtype=float), 1.0)
    p = radial_pair(beta, 50, N=4.0, d=2, lam_n1=1.0)
    rng = np.random.default_rng(8)
    for _ in range(100):
        x = rng.uniform(p.region.lo, p.region.hi)
        assert float(p.g(x)) <= 2.0 * np.linalg.norm(x) + 1e-9


def test_radial_potential_variant():
    W = lambda x: float(np.dot(x, x)) / 2.0
    gW = lambda x: np.asarray(x, dtype=float)
    hW = lambda x: np.eye(len(x))
    p = radial_pair(lambda s: np.minimum(np.abs(np.asarray(s, dtype=float)), 1.0),
                    20, N=2.0, d=2, lam_n1=1.0, variant="potential",
                    potential=(W, gW, hW))
    x = np.array([0.6, 0.3])
    assert np.asarray(p.b_k(x)).shape == (2,)
    assert float(p.V(x)) > 0
    m = check_conditions(p, n_x=16)
    assert m.lyapunov >= -1e-9


# -- conditions ---------------------------------------------------------------

def test_check_conditions_sqrt_identity_slack():
    m = check_conditions(sqrt_pair(100), n_x=201)
    assert m.lyapunov >= -1e-10
    assert m.growth >= 0.0


def test_check_conditions_one_sided_linear_field():
    # V = 1 with drift -x: the inequality is tight at C2 = 2 * (-1)
    lin = SmoothField(1, lambda x, t=0.0: -np.asarray(x, dtype=float),
                      lambda x, t=0.0: -np.ones_like(np.asarray(x, dtype=float)),
                      growth_const=1.0)
    pair = ApproximationPair(
        k=1, b_k=lin, V=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        V_grad=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        base=resolve_field("linear:-1"), region=Box.interval(-2, 2),
        growth_const=1.0, lyapunov_const=-2.0, v_floor=1.0, recipe="one-sided")
    m = check_conditions(pair, n_x=101)
    assert m.lyapunov == pytest.approx(0.0, abs=1e-12)


def test_check_conditions_growth_for_sqrt():
    m = check_conditions(sqrt_pair(10), n_x=401)
    assert m.growth >= 0.0  # (x^2 + k^-2)^{1/4} <= 1 + |x|


def test_check_conditions_quadratic_variant():
    p = sqrt_pair(100)
    p.quad_coeff = 0.1
    p.lyapunov_const = 1.0  # C - delta |b_k|^2 variant needs C > 0 headroom
    m = check_conditions(p, n_x=101)
    assert m.quadratic is not None
    assert m.quadratic >= -1e-9


# -- certificates -------------------------------------------------------------

@pytest.fixture(scope="module")
def sharp_paths():
    M = 1000
    times = np.linspace(0, 1, M + 1)
    moving = MeasurePath(times, [SignedMeasure.dirac(t * t / 4) for t in times])
    stationary = MeasurePath(times, [SignedMeasure.dirac(0.0) for _ in times])
    return moving, stationary


@pytest.fixture(scope="module")
def sqrt_pairs():
    return [sqrt_pair(k) for k in (10, 100, 1000, 10000)]


def test_certificate_moving_path(sharp_paths, sqrt_pairs):
    moving, _ = sharp_paths
    cert = certificate(moving, SQRT, sqrt_pairs, Box.interval(-2, 2))
    # independent quadrature oracle for J_k on the known trajectory
    M = len(moving.times) - 1
    t = np.arange(M) / M
    x = t * t / 4
    for k in cert.ks:
        g = np.abs(np.sqrt(x) - (x * x + k ** -2.0) ** 0.25) / (x * x + k ** -2.0) ** 0.25
        oracle = float(np.sum(g)) / M
        assert cert.J[k] == pytest.approx(oracle, abs=1e-12)
    js = [cert.J[k] for k in cert.ks]
    assert all(a > b for a, b in zip(js, js[1:]))
    bound = 2 * 1e4 ** -0.5 * (1 + np.log(np.sqrt(1e4) / 2))
    assert js[-1] <= bound
    assert cert.verdict == "certified"


def test_certificate_stationary_path(sharp_paths, sqrt_pairs):
    _, stationary = sharp_paths
    cert = certificate(stationary, SQRT, sqrt_pairs, Box.interval(-2, 2))
    for k in cert.ks:
        assert cert.J[k] == pytest.approx(1.0, abs=1e-9)
    assert cert.verdict == "rejected"
    assert cert.boundary_mass == pytest.approx(1.0, abs=1e-9)


def test_certificate_empty_path(sqrt_pairs):
    times = np.linspace(0, 1, 11)
    empty = MeasurePath(times, [SignedMeasure.empty() for _ in times])
    cert = certificate(empty, SQRT, sqrt_pairs, Box.interval(-2, 2))
    assert all(cert.J[k] == 0.0 for k in cert.ks)
    assert cert.verdict == "certified"


def test_certificate_monotone_under_restriction(sharp_paths, sqrt_pairs):
    moving, _ = sharp_paths
    big = certificate(moving, SQRT, sqrt_pairs[:2], Box.interval(-2, 2))
    small = certificate(moving, SQRT, sqrt_pairs[:2], Box.interval(-0.1, 0.1))
    for k in big.ks:
        assert small.J[k] <= big.J[k] + 1e-15


def test_certificate_dimension_mismatch(sqrt_pairs):
    times = np.linspace(0, 1, 3)
    path2d = MeasurePath(times, [SignedMeasure.dirac(np.zeros(2)) for _ in times])
    with pytest.raises(ValueError, match="dimension"):
        certificate(path2d, SQRT, sqrt_pairs, Box.interval(-1, 1))
