"""Measure data model: total variation, integration, push-forward, flat metric."""
import json
import math

import numpy as np
import pytest

from contlab.measures import (Box, DensityPiece, MeasurePath, SignedMeasure,
                              bl_distance, bl_error_bound, bump, integrate,
                              path_integrate, pushforward, random_test_function,
                              separable, total_variation)


def test_tv_single_atom():
    m = SignedMeasure.dirac(0.0)
    assert total_variation(m, Box.interval(-1, 1)) == 1.0


def test_tv_cancellation_on_merge():
    m = SignedMeasure(1, atoms=[((0.0,), 1.0), ((0.0,), -1.0)])
    assert len(m.atom_weights) == 0
    assert total_variation(m, Box.interval(-1, 1)) == 0.0


def test_tv_density_exact_trapezoid():
    m = SignedMeasure.from_density(np.linspace(0, 2, 9), np.ones(9))
    assert total_variation(m, Box.interval(0, 1)) == pytest.approx(1.0, abs=1e-14)


def test_tv_sign_change_exact():
    # linear density crossing zero at 0.5: integral of |v| over [0,1] is 1/4
    m = SignedMeasure.from_density([0.0, 1.0], [-0.5, 0.5])
    assert total_variation(m, Box.interval(0, 1)) == pytest.approx(0.25, abs=1e-14)


def test_tv_unbounded_region_rejected():
    with pytest.raises(ValueError, match="region must be bounded"):
        total_variation(SignedMeasure.dirac(0.0), Box.interval(-np.inf, 0))


def test_tv_additive_over_disjoint_regions():
    rng = np.random.default_rng(3)
    grid = np.sort(rng.uniform(-2, 2, 17))
    m = SignedMeasure(1, atoms=[((x,), w) for x, w in zip(rng.uniform(-2, 2, 5),
                                                          rng.normal(size=5))],
                      density=(grid, rng.normal(size=17)))
    whole = total_variation(m, Box.interval(-3, 3))
    # avoid cutting exactly through an atom
    parts = (total_variation(m, Box.interval(-3, 2.0000001))
             + total_variation(m, Box.interval(2.0000001, 3)))
    assert abs(whole - parts) < 1e-12


def test_integrate_atom_examples():
    assert integrate(SignedMeasure.dirac(0.7), lambda x: x) == pytest.approx(0.7)
    m = SignedMeasure(1, atoms=[((0.0,), 1.0), ((1.0,), 1.0)])
    assert integrate(m, lambda x: x ** 2) == pytest.approx(1.0)


def test_integrate_density_closed_form():
    m = SignedMeasure.uniform(0.0, 1.0, 1.0, n=11)
    assert integrate(m, lambda x: x) == pytest.approx(0.5, abs=1e-10)


def test_integrate_nonfinite_rejected():
    m = SignedMeasure.dirac(0.0)
    with pytest.raises(ValueError, match="not finite"):
        integrate(m, lambda x: float("nan"))


def test_pushforward_atom_translation():
    out = pushforward(SignedMeasure.dirac(0.0), lambda x: x + 3.0)
    assert out.atom_locs[0][0] == 3.0 and out.atom_weights[0] == 1.0


def test_pushforward_identity():
    m = SignedMeasure(1, atoms=[((0.5,), 2.0)], density=([0.0, 1.0], [1.0, 1.0]))
    out = pushforward(m, lambda x: x)
    assert out.mass() == pytest.approx(m.mass(), abs=1e-14)
    assert np.allclose(out.pieces[0].values, m.pieces[0].values)


def test_pushforward_density_change_of_variables():
    m = SignedMeasure.uniform(0.0, 1.0, 1.0, n=6)
    out = pushforward(m, lambda x: 2.0 * x)
    assert out.pieces[0].span == (0.0, 2.0)
    assert np.allclose(out.pieces[0].values, 0.5)
    assert out.mass() == pytest.approx(1.0, abs=1e-14)


def test_pushforward_cellwise_mass_identity():
    rng = np.random.default_rng(5)
    grid = np.sort(rng.uniform(0.2, 2.0, 9))
    vals = rng.uniform(0.1, 1.0, 9)
    m = SignedMeasure.from_density(grid, vals)
    out = pushforward(m, lambda x: x ** 2)   # strictly monotone on the span
    before = m.pieces[0].cell_masses()
    after = out.pieces[0].cell_masses()
    assert np.allclose(before, after, atol=1e-13)


def test_pushforward_decreasing_map():
    m = SignedMeasure.uniform(0.0, 1.0, 1.0, n=5)
    out = pushforward(m, lambda x: -x)
    assert out.pieces[0].span == (-1.0, 0.0)
    assert out.mass() == pytest.approx(1.0, abs=1e-13)


def test_pushforward_nonmonotone_rejected():
    m = SignedMeasure.uniform(-1.0, 1.0, 1.0, n=7)
    with pytest.raises(ValueError, match="monotone"):
        pushforward(m, lambda x: x * x)


def test_pushforward_preserves_atom_weights_exactly():
    rng = np.random.default_rng(11)
    weights = rng.normal(size=8)
    m = SignedMeasure(1, atoms=[((x,), w) for x, w in zip(rng.uniform(-1, 1, 8), weights)])
    out = pushforward(m, lambda x: math.exp(x))
    assert abs(sum(out.atom_weights) - sum(weights)) < 1e-14


def test_bl_identical_and_scaled_atoms():
    region = Box.interval(-1, 1)
    a = SignedMeasure.dirac(0.0)
    assert bl_distance(a, a, region) == 0.0
    assert bl_distance(a, SignedMeasure.dirac(0.0, 2.0), region) == pytest.approx(1.0, abs=1e-9)


def test_bl_two_atoms_matches_transport_cost():
    region = Box.interval(-1, 1)
    a, b = SignedMeasure.dirac(0.0), SignedMeasure.dirac(0.3)
    d = bl_distance(a, b, region)
    assert abs(d - 0.3) <= bl_error_bound(a, b, region)


def test_bl_pseudometric_properties():
    region = Box.interval(-1, 1)
    rng = np.random.default_rng(2)
    ms = [SignedMeasure(1, atoms=[((x,), w) for x, w in
                                  zip(rng.uniform(-0.8, 0.8, 3), rng.uniform(0.2, 1.0, 3))])
          for _ in range(3)]
    d01 = bl_distance(ms[0], ms[1], region)
    d10 = bl_distance(ms[1], ms[0], region)
    assert d01 == pytest.approx(d10, abs=1e-12)
    d02 = bl_distance(ms[0], ms[2], region)
    d12 = bl_distance(ms[1], ms[2], region)
    mesh_tol = sum(bl_error_bound(a, b, region) for a, b in
                   [(ms[0], ms[1]), (ms[1], ms[2]), (ms[0], ms[2])])
    assert d02 <= d01 + d12 + mesh_tol


def test_path_integrate_constant():
    times = np.linspace(0, 1, 11)
    p = MeasurePath(times, [SignedMeasure.dirac(0.0) for _ in times])
    assert path_integrate(p, lambda x, t: 1.0) == pytest.approx(1.0, abs=1e-14)


def test_path_integrate_moving_atom_left_rule():
    M = 1000
    times = np.linspace(0, 1, M + 1)
    p = MeasurePath(times, [SignedMeasure.dirac(t * t / 4) for t in times])
    got = path_integrate(p, lambda x, t: x)
    oracle = sum((i / M) ** 2 / 4 for i in range(M)) / M  # independent left sum
    assert got == pytest.approx(oracle, abs=1e-13)
    assert abs(got - 1.0 / 12.0) < 5e-4  # within the left-rule error of the integral


def test_path_integrate_empty_path():
    p = MeasurePath(np.linspace(0, 1, 5), [SignedMeasure.empty() for _ in range(5)])
    assert path_integrate(p, lambda x, t: 1.0) == 0.0


def test_path_integrate_linear_in_u():
    rng = np.random.default_rng(9)
    times = np.linspace(0, 1, 21)
    p = MeasurePath(times, [SignedMeasure.dirac(float(rng.uniform(-1, 1))) for _ in times])
    u1 = lambda x, t: x + t
    u2 = lambda x, t: np.cos(x) * t
    a, b = 0.7, -1.3
    combined = path_integrate(p, lambda x, t: a * u1(x, t) + b * u2(x, t))
    split = a * path_integrate(p, u1) + b * path_integrate(p, u2)
    assert combined == pytest.approx(split, abs=1e-12)


def test_measure_json_round_trip():
    m = SignedMeasure(1, atoms=[((0.5,), -2.0)], density=([0.0, 1.0, 2.0], [0.0, 1.0, 0.0]))
    obj = json.loads(json.dumps(m.to_json_dict()))
    m2 = SignedMeasure.from_json_dict(obj)
    assert m2.atom_list()[0][1] == -2.0
    assert np.allclose(m2.pieces[0].grid, [0, 1, 2])


def test_path_json_round_trip():
    times = np.linspace(0, 1, 5)
    p = MeasurePath(times, [SignedMeasure.dirac(t) for t in times])
    p2 = MeasurePath.loads(p.dumps())
    assert np.allclose(p2.times, p.times)
    assert p2.slices[3].atom_locs[0][0] == pytest.approx(0.75)


def test_test_function_derivative_consistency():
    rng = np.random.default_rng(1)
    u = separable(bump(0.2, 1.0, 1.5), lambda t: 1.0 + 0.5 * t, lambda t: 0.5)
    assert u.check_derivatives(rng) < 1e-5


def test_random_test_function_support():
    rng = np.random.default_rng(4)
    u = random_test_function(rng)
    R = u.support_radius
    assert u.value(R * 1.01, 0.3) == 0.0
    assert u.value(-R * 1.01, 0.3) == 0.0


def test_density_piece_requires_increasing_grid():
    with pytest.raises(ValueError, match="strictly increasing"):
        DensityPiece(np.array([0.0, 0.0, 1.0]), np.zeros(3))
