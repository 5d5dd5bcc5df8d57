from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from charmonic.bundle_maps import euclidean_map, identity_map, random_smooth_field, sphere_map, tension_array, torus_map
from charmonic.functionals import e4_functional
from charmonic.geometry import conformal_metric, make_flat_torus
from charmonic.jets import (
    RJet,
    UndeterminedSlotError,
    constant_jet,
    dumps_jet,
    eigenmode_jet,
    energy_density_jet,
    functional_from_jet,
    jet_exp,
    jet_from_json,
    jet_log1p,
    jet_mul,
    jet_scalar_div,
    jet_sqrt,
    jet_to_json,
    poincare_metric_jet,
    solve_phi_jet,
)
from charmonic.operators import a_n, h4_array, sphere_eigenvalue
from conftest import philox

fractions = st.fractions(min_value=-3, max_value=3, max_denominator=7)


@given(a=st.lists(fractions, min_size=4, max_size=4), b=st.lists(fractions, min_size=4, max_size=4))
def test_jet_product_matches_polynomial_product(a, b):
    prod = jet_mul(RJet(a), RJet(b))
    full = np.polynomial.polynomial.polymul(np.array(a, dtype=object), np.array(b, dtype=object))
    assert prod.raw == [full[k] if k < len(full) else 0 for k in range(4)]


@given(a=st.lists(fractions, min_size=4, max_size=4), b0=fractions.filter(lambda x: x != 0),
       b=st.lists(fractions, min_size=3, max_size=3))
def test_jet_division_inverts_product(a, b0, b):
    bj = RJet([b0] + b)
    assert jet_scalar_div(jet_mul(RJet(a), bj), bj).raw == a


def test_jet_exp_log_roundtrip():
    x = RJet([0.0, 0.3, -0.2, 0.1, 0.05])
    back = jet_log1p(jet_exp(x) - constant_jet(1.0, 4))
    assert np.allclose(back.raw, x.raw)


def test_jet_sqrt_squares_back():
    a = RJet([2.0, 0.5, -0.3, 0.2])
    r = jet_sqrt(a)
    assert np.allclose(jet_mul(r, r).raw, a.raw)


def test_exact_exp_coefficients():
    e = jet_exp(RJet([Fraction(0), Fraction(1), Fraction(0), Fraction(0)]))
    assert e.raw == [1, 1, Fraction(1, 2), Fraction(1, 6)]


def test_undetermined_slot_raises():
    grid, g = make_flat_torus(4, (8,) * 4)
    mj = poincare_metric_jet(g)
    assert mj.metric.undetermined_mask == [False, False, False, False, True]
    with pytest.raises(UndeterminedSlotError):
        mj.metric.coeff(4)


def test_parity_tag_validates():
    with pytest.raises(ValueError):
        RJet([1.0, 0.5, 0.0, 0.0, 0.0], parity_tag="even_to_nm1")


def test_flat_identity_jet_is_trivial(torus8):
    grid, g = torus8
    pj = solve_phi_jet(identity_map(grid), g)
    assert np.max(np.abs(pj.H)) < 1e-12
    assert np.max(np.abs(pj.jet.coeff(2))) < 1e-12


def test_grid_H_matches_h4(conformal12):
    grid, _, _, g = conformal12
    phi = torus_map(grid, np.eye(4), random_smooth_field(philox(1), grid, 0.3, 1, lead=(4,)))
    pj = solve_phi_jet(phi, g)
    h = h4_array(phi, g)
    assert np.max(np.abs(pj.H - h)) <= 1e-8 * np.max(np.abs(h))
    assert np.max(np.abs(pj.jet.coeff(1))) == 0.0 and np.max(np.abs(pj.jet.coeff(3))) == 0.0


def test_u2_is_tension_over_2_minus_n(conformal12):
    grid, _, _, g = conformal12
    phi = torus_map(grid, np.eye(4), random_smooth_field(philox(2), grid, 0.3, 1, lead=(4,)))
    pj = solve_phi_jet(phi, g)
    assert np.allclose(pj.jet.coeff(2), tension_array(phi, g) / (2 * (2 - 4)), atol=1e-10)


def test_functional_from_jet_matches_e4(conformal12):
    grid, _, _, g = conformal12
    phi = torus_map(grid, np.eye(4), random_smooth_field(philox(3), grid, 0.3, 1, lead=(4,)))
    pj = solve_phi_jet(phi, g)
    val = functional_from_jet(energy_density_jet(pj, poincare_metric_jet(g)), 4, g)
    assert val == pytest.approx(e4_functional(phi, g), rel=1e-6)


def test_dimension_two_is_classical():
    grid, flat = make_flat_torus(2, (16, 16))
    g = conformal_metric(flat, random_smooth_field(philox(4), grid, 0.2, 1))
    phi = euclidean_map(grid, random_smooth_field(philox(5), grid, 0.5, 1, lead=(2,)))
    pj = solve_phi_jet(phi, g)
    assert pj.classical
    assert np.allclose(pj.H, float(a_n(2)) * tension_array(phi, g), atol=1e-10)


def test_sphere_target_not_supported():
    grid, g = make_flat_torus(4, (8,) * 4)
    x = np.zeros((3,) + grid.shape)
    x[2] = 1
    with pytest.raises(NotImplementedError):
        solve_phi_jet(sphere_map(grid, x), g)


@given(k=st.integers(0, 6), lam=st.fractions(min_value=-1, max_value=1, max_denominator=8))
def test_eigenmode_H_closed_forms(k, lam):
    mu = Fraction(sphere_eigenvalue(4, k))
    assert eigenmode_jet(4, lam, mu).H == a_n(4) * mu * (mu + 8 * lam)
    mu6 = Fraction(sphere_eigenvalue(6, k))
    assert 384 * eigenmode_jet(6, lam, mu6).H == mu6 * (mu6 + 16 * lam) * (mu6 + 24 * lam)


@given(n=st.integers(2, 8), mu=st.fractions(min_value=0, max_value=50, max_denominator=5),
       lam=st.fractions(min_value=-1, max_value=1, max_denominator=8))
def test_eigenmode_odd_coefficients_vanish(n, mu, lam):
    r = eigenmode_jet(n, lam, mu)
    assert all(r.u[j] == 0 for j in range(1, n, 2))
    if n % 2:
        assert not r.log_present


@given(n=st.sampled_from([2, 4, 6, 8]), lam=st.fractions(min_value=-1, max_value=1, max_denominator=8))
def test_harmonic_eigenmode_has_zero_jet(n, lam):
    r = eigenmode_jet(n, lam, 0)
    assert r.H == 0 and all(c == 0 for c in r.u[1:n])


def test_einstein_metric_jet_exact():
    grid, g = make_flat_torus(4, (8,) * 4)
    mj = poincare_metric_jet(g, mode="einstein", lam=0.25)
    # √det((1−λr²)² g)/√det g = (1−λr²)^4
    expected = [1.0, 0.0, -1.0, 0.0, 6 * 0.25**2]
    assert [float(np.max(c)) for c in mj.volume.raw] == pytest.approx(expected)


def test_jet_json_roundtrip(torus8):
    grid, g = torus8
    jet = poincare_metric_jet(g).metric
    back = jet_from_json(jet_to_json(jet, grid), grid)
    assert back.undetermined_mask == jet.undetermined_mask
    assert all(np.array_equal(a, b) for a, b in zip(back.raw[:4], jet.raw[:4]))
    assert isinstance(dumps_jet(jet, grid), str)
