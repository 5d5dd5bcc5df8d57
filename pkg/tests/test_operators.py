from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from charmonic.bundle_maps import euclidean_map, identity_map, random_smooth_field, sphere_map, torus_map
from charmonic.functionals import e4_functional
from charmonic.geometry import apply_fourier_multiplier, conformal_metric, flat_laplacian_symbol, integrate, make_flat_torus
from charmonic.operators import (
    a_n,
    c6_einstein_operator,
    check_c_harmonic,
    check_identity_c_harmonic,
    el4_array,
    gjms_einstein,
    gjms_einstein_symbol,
    gjms_shift,
    h4_array,
    identity_h4,
    identity_h4_closed_form,
    paneitz4,
    paneitz_einstein_symbol,
    section_l2_norm,
    sphere_eigenvalue,
)
from conftest import philox


def test_a_n_values():
    assert a_n(2) == Fraction(1, 2)
    assert a_n(4) == Fraction(-1, 16)
    assert a_n(6) == Fraction(1, 384)
    with pytest.raises(ValueError):
        a_n(3)


def test_h4_is_a4_el4(conformal12):
    grid, _, _, g = conformal12
    phi = torus_map(grid, np.eye(4), random_smooth_field(philox(1), grid, 0.3, 1, lead=(4,)))
    assert np.allclose(h4_array(phi, g), -el4_array(phi, g) / 16)


def test_paneitz_flat_is_bilaplacian(torus8):
    grid, g = torus8
    f = random_smooth_field(philox(2), grid, 1.0, 2)
    assert np.allclose(paneitz4(f, g), apply_fourier_multiplier(f, flat_laplacian_symbol(grid) ** 2, grid), atol=1e-9)


def test_paneitz_self_adjoint_annihilates_constants(conformal12):
    grid, _, _, g = conformal12
    rng = philox(3)
    f, h = random_smooth_field(rng, grid, 1.0, 1), random_smooth_field(rng, grid, 1.0, 1)
    assert integrate(f * paneitz4(h, g), g) == pytest.approx(integrate(h * paneitz4(f, g), g), rel=1e-9)
    assert np.max(np.abs(paneitz4(np.ones(grid.shape), g))) < 1e-10


def test_h4_scalar_equals_a4_paneitz(conformal12):
    grid, _, _, g = conformal12
    f = random_smooth_field(philox(4), grid, 0.5, 2)
    p = paneitz4(f, g)
    assert np.max(np.abs(h4_array(euclidean_map(grid, f), g)[0] - float(a_n(4)) * p)) <= 1e-8 * np.max(np.abs(p))


def test_e4_scalar_is_half_paneitz_pairing(conformal12):
    grid, _, _, g = conformal12
    f = random_smooth_field(philox(5), grid, 0.5, 1)
    assert e4_functional(euclidean_map(grid, f), g) == pytest.approx(0.5 * integrate(f * paneitz4(f, g), g), rel=1e-9)


def test_identity_h4_flat_zero_and_closed_form(torus12):
    grid, flat = torus12
    assert check_identity_c_harmonic(flat, 1e-10).ok
    g = conformal_metric(flat, random_smooth_field(philox(6), grid, 0.1, 1))
    h = identity_h4(g)
    assert np.max(np.abs(h - identity_h4_closed_form(g))) <= 1e-4 * np.max(np.abs(h))


def test_identity_map_c_harmonic_check(torus8):
    grid, g = torus8
    res = check_c_harmonic(identity_map(grid), g, 1e-10)
    assert res.ok and res.residual < 1e-10


def test_gjms_shift_values():
    assert gjms_shift(4, 1) == Fraction(1, 6)
    assert gjms_shift(4, 2) == 0


@given(k=st.integers(0, 12))
def test_gjms_covariant_matches_paneitz_and_branson(k):
    mu = sphere_eigenvalue(4, k)
    assert gjms_einstein_symbol(mu, 4, 12) == paneitz_einstein_symbol(mu, 12)
    assert gjms_einstein_symbol(mu, 4, 12) == k * (k + 1) * (k + 2) * (k + 3)


@given(n=st.sampled_from([2, 4, 6, 8]), num=st.integers(-20, 20), den=st.integers(1, 5))
def test_gjms_annihilates_constants(n, num, den):
    assert gjms_einstein_symbol(0, n, Fraction(num, den)) == 0


def test_gjms_literal_differs():
    mu = sphere_eigenvalue(4, 1)
    assert gjms_einstein_symbol(mu, 4, 12, "literal") != paneitz_einstein_symbol(mu, 12)


def test_gjms_grid_flat_is_bilaplacian(torus8):
    grid, g = torus8
    f = random_smooth_field(philox(7), grid, 1.0, 2)
    assert np.allclose(gjms_einstein(f, g, 4, 0.0), apply_fourier_multiplier(f, flat_laplacian_symbol(grid) ** 2, grid), atol=1e-9)


def test_sphere_target_h4_finite():
    grid, g = make_flat_torus(4, (8,) * 4)
    x = random_smooth_field(philox(8), grid, 0.2, 1, lead=(3,))
    x[2] += 1
    phi = sphere_map(grid, x)
    h = h4_array(phi, g)
    assert np.all(np.isfinite(h)) and section_l2_norm(h, g) > 0
    assert np.max(np.abs(np.sum(h * phi.periodic, axis=0))) < 1e-8 * np.max(np.abs(h))


def test_c6_requires_dim6(torus8):
    grid, g = torus8
    with pytest.raises(ValueError):
        c6_einstein_operator(identity_map(grid), g, 0.0)


def test_h4_constant_scaling_exponent(torus8):
    grid, flat = torus8
    phi = torus_map(grid, np.eye(4), random_smooth_field(philox(9), grid, 0.3, 1, lead=(4,)))
    c = 1.7
    h = section_l2_norm(h4_array(phi, flat), flat)
    hc = section_l2_norm(h4_array(phi, conformal_metric(flat, np.log(c))), flat)
    assert np.log(hc / h) / np.log(c) == pytest.approx(-4.0, abs=1e-10)


def test_identity_residual_grows_along_conformal_family(torus12):
    grid, flat = torus12
    om = random_smooth_field(philox(10), grid, 1.0, 1)
    res = [section_l2_norm(identity_h4(conformal_metric(flat, s * om)), flat) for s in (0.0, 0.05, 0.1, 0.2)]
    assert res[0] <= 1e-10
    assert all(b > a for a, b in zip(res, res[1:]))
