"""Field catalog, moduli of continuity, mollification, mirror, decompositions."""
import numpy as np
import pytest
from scipy.integrate import quad

from contlab.fields import (FieldDecomposition, VectorField, cos2_mollifier, mirror,
                            modulus_of_continuity, mollify, one_sided_constant,
                            resolve_field)
from contlab.measures import Box


def test_modulus_constant_field_is_zero():
    assert modulus_of_continuity(resolve_field("const:3"), (-2, 2), 0.1) == 0.0


def test_modulus_identity_field():
    got = modulus_of_continuity(resolve_field("linear:1"), (-2, 2), 0.1)
    assert got == pytest.approx(0.11, abs=1e-9)


def test_modulus_sqrt_field():
    got = modulus_of_continuity(resolve_field("sqrt_abs"), (-2, 2), 0.01)
    assert got == pytest.approx(0.11, abs=1e-6)


def test_mollifier_unit_mass_and_support():
    rho = cos2_mollifier()
    assert rho.mass() == pytest.approx(1.0, abs=1e-10)
    assert rho.profile(1.0001) == 0.0 and rho.profile(-1.0001) == 0.0


def test_mollify_constant_field():
    rho = cos2_mollifier()
    for k in (1, 7, 50):
        mf = mollify(resolve_field("const:2.5"), rho, k, domain=(-3, 3))
        assert mf(0.3) == pytest.approx(2.5, abs=1e-10)


def test_mollify_identity_odd_moment_cancellation():
    mf = mollify(resolve_field("linear:1"), cos2_mollifier(), 10, domain=(-3, 3))
    assert mf(0.7) == pytest.approx(0.7, abs=1e-10)
    assert mf.jac(0.7) == pytest.approx(1.0, abs=1e-9)


def test_mollify_abs_at_kink_matches_quadrature_oracle():
    rho = cos2_mollifier()
    k = 10
    mf = mollify(VectorField(1, lambda x, t=0.0: np.abs(np.asarray(x, dtype=float))),
                 rho, k, domain=(-3, 3))
    oracle = quad(lambda y: abs(y) * k * rho.profile(k * y), -1.0 / k, 1.0 / k,
                  epsabs=1e-13)[0]
    got = mf(0.0)
    assert 0 < got <= 1.0 / k
    assert got == pytest.approx(oracle, abs=1e-10)


def test_mollify_domain_guard():
    mf = mollify(resolve_field("linear:1"), cos2_mollifier(), 10, domain=(-1, 1))
    with pytest.raises(ValueError, match="outside"):
        mf(5.0)


def test_mollify_lipschitz_error_bound():
    # |b * rho_{1/k} - b| <= Lambda / k for Lipschitz b
    lam, k = 2.0, 25
    b = resolve_field("linear:2")
    mf = mollify(b, cos2_mollifier(), k, domain=(-3, 3))
    xs = np.linspace(-1.5, 1.5, 31)
    err = max(abs(mf(float(x)) - float(b(float(x)))) for x in xs)
    assert err <= lam / k + 1e-10


def test_mirror_involution():
    b = resolve_field("sqrt_abs")
    double = mirror(mirror(b))
    xs = np.linspace(-2, 2, 41)
    assert np.allclose(double(xs), b(xs), atol=1e-15)


def test_mirror_fixed_points_and_constant():
    assert mirror(resolve_field("linear:1"))(0.7) == pytest.approx(0.7)
    assert mirror(resolve_field("const:1"))(0.3) == pytest.approx(-1.0)


def test_mollify_commutes_with_mirror():
    b = resolve_field("sqrt_abs")
    k = 8
    a = mirror(mollify(b, cos2_mollifier(), k, domain=(-4, 4)))
    c = mollify(mirror(b), cos2_mollifier(), k, domain=(-4, 4))
    xs = np.linspace(-1.5, 1.5, 21)
    assert max(abs(float(a(float(x))) - float(c(float(x)))) for x in xs) < 1e-9


def test_smooth_field_jacobian_matches_differences():
    mf = mollify(resolve_field("sqrt_abs"), cos2_mollifier(), 12, domain=(-4, 4))
    rng = np.random.default_rng(0)
    assert mf.check_jacobian(Box.interval(-2, 2), rng, n=10) < 1e-6


def test_one_sided_constant_linear_fields():
    est = one_sided_constant(resolve_field("linear:-1"), Box.interval(-1, 1))
    assert est.value == pytest.approx(-1.0, abs=1e-6)
    assert not est.unbounded
    est = one_sided_constant(resolve_field("linear:1"), Box.interval(-1, 1))
    assert est.value == pytest.approx(1.0, abs=1e-6)


def test_one_sided_constant_sqrt_flagged_unbounded():
    est = one_sided_constant(resolve_field("sqrt_abs"), Box.interval(-1, 1))
    assert est.unbounded
    assert est.value > 4.0


def test_decomposition_checks():
    good = FieldDecomposition(lambda x: -np.minimum(np.asarray(x, dtype=float), 0.0),
                              lambda x: np.maximum(np.asarray(x, dtype=float) - 1.0, 0.0),
                              1.0)
    good.check((-2, 3))
    bad = FieldDecomposition(lambda x: -np.asarray(x, dtype=float),
                             lambda x: np.ones_like(np.asarray(x, dtype=float)),
                             1.0)
    with pytest.raises(ValueError, match="g\\(x\\) < 0 must force"):
        bad.check((-2, 2))
    wrong_lip = FieldDecomposition(lambda x: -3.0 * np.minimum(np.asarray(x, dtype=float), 0.0),
                                   lambda x: np.zeros_like(np.asarray(x, dtype=float)),
                                   1.0)
    with pytest.raises(ValueError, match="Lipschitz"):
        wrong_lip.check((-2, 2))


def test_field_catalog_entries(tmp_path):
    assert resolve_field("sqrt_abs")(4.0) == pytest.approx(2.0)
    assert resolve_field("const:-2")(1.0) == pytest.approx(-2.0)
    assert resolve_field("linear:3")(2.0) == pytest.approx(6.0)
    rb = resolve_field("radial_beta:one", d=2)
    assert np.allclose(rb(np.array([1.0, 0.0])), [-1.0, 0.0])
    csv = tmp_path / "table.csv"
    csv.write_text("0.0,1.0\n1.0,2.0\n")
    tf = resolve_field("custom_table:%s" % csv)
    assert tf(0.5) == pytest.approx(1.5)
    assert tf(2.0) == pytest.approx(2.0)  # clamped beyond the table
    with pytest.raises(KeyError):
        resolve_field("nope")


def test_growth_constant_check():
    b = resolve_field("sqrt_abs")
    rng = np.random.default_rng(6)
    assert b.check_growth(Box.interval(-3, 3), rng) >= 0.0
