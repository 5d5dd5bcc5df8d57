import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from charmonic.bundle_maps import identity_map, random_smooth_field, torus_map
from charmonic.functionals import e4_functional, einstein_closed_form
from charmonic.geometry import conformal_metric
from charmonic.jets import energy_density_jet, poincare_metric_jet, solve_phi_jet
from charmonic.renorm import (
    IllConditioned,
    einstein_profile,
    extension_profile,
    fit_expansion,
    fit_json,
    ladder_csv,
    log_coefficient_from_jet,
    odd_constant_demo,
    renormalized_functional,
    ruban_energy,
    ruban_ladder,
)
from conftest import philox

RHOS = 0.5 * 2.0 ** -np.arange(1, 13)


def test_synthetic_roundtrip():
    fit = fit_expansion(RHOS, 3 * RHOS**-2 + 5 * np.log(1 / RHOS) + 7, 4)
    assert fit.divergent[-2] == pytest.approx(3, abs=1e-8)
    assert fit.F == pytest.approx(5, abs=1e-8)
    assert fit.const == pytest.approx(7, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(c=st.lists(st.floats(-10, 10), min_size=4, max_size=4))
def test_synthetic_roundtrip_dim6(c):
    vals = c[0] * RHOS**-4 + c[1] * RHOS**-2 + c[2] * np.log(1 / RHOS) + c[3]
    fit = fit_expansion(RHOS, vals, 6)
    # the O(1) terms sit under ρ^{-4} ~ 1e13: recoverable only to rounding of the largest sample
    floor = 1e3 * np.finfo(float).eps * max(np.max(np.abs(vals)), 1.0)
    assert abs(fit.F - c[2]) <= floor
    assert abs(fit.const - c[3]) <= floor


def test_too_few_samples():
    with pytest.raises(ValueError):
        fit_expansion(RHOS[:5], RHOS[:5], 4)


def test_ill_conditioned_refused():
    rhos = 1e-3 * (1 + 1e-9 * np.arange(20))
    with pytest.raises(IllConditioned):
        fit_expansion(rhos, rhos, 6)


def test_rho_must_be_below_eps():
    with pytest.raises(ValueError):
        ruban_energy(lambda r: 1.0, 4, 0.6, 0.5)


def test_constant_map_has_zero_energy():
    r, e = ruban_ladder(lambda r: 0.0, 4)
    assert np.all(e == 0)


def test_einstein_quadrature_matches_antiderivative():
    lam, energy, eps = 0.25, 3.0, 0.5

    def exact(rho):
        # ½ I ∫ r^{-3}(1 − λr²)² dr
        prim = lambda r: -0.5 * r**-2 - 2 * lam * math.log(r) + 0.5 * lam**2 * r**2
        return 0.5 * energy * (prim(eps) - prim(rho))

    r, e = ruban_ladder(einstein_profile(lam, energy, 4), 4, eps)
    assert np.max(np.abs(e - np.array([exact(x) for x in r])) / np.abs(e)) <= 1e-10


def test_einstein_F_magnitude_and_closed_form():
    lam, energy = 0.25, 10.0
    fit = fit_expansion(*ruban_ladder(einstein_profile(lam, energy, 4), 4), 4)
    assert abs(abs(fit.F) - lam * energy) <= 1e-4 * lam * energy
    assert fit.F < 0
    closed = einstein_closed_form(4, lam, energy)
    assert renormalized_functional(fit.F, 4) == pytest.approx(closed, rel=1e-3)
    assert renormalized_functional(fit.F, 4, "literal") == pytest.approx(-closed, rel=1e-3)


def test_renormalized_zero_and_bad_convention():
    assert renormalized_functional(0.0, 4) == 0.0
    with pytest.raises(ValueError):
        renormalized_functional(1.0, 4, "other")


def test_flat_identity_has_no_log(torus8):
    grid, g = torus8
    pj = solve_phi_jet(identity_map(grid), g)
    fit = fit_expansion(*ruban_ladder(extension_profile(pj, poincare_metric_jet(g)), 4), 4)
    assert abs(fit.F) <= 1e-8 * abs(fit.divergent[-2])


def test_fit_residual_shrinks_with_tail():
    lam, energy = 0.25, 10.0
    r, e = ruban_ladder(einstein_profile(lam, energy, 4), 4)
    res0 = abs(fit_expansion(r, e, 4, tail=0).F + lam * energy)
    res1 = abs(fit_expansion(r, e, 4, tail=1).F + lam * energy)
    assert res1 < 1e-2 * res0


def test_generic_fit_matches_jet_and_e4(conformal12):
    grid, _, _, g = conformal12
    phi = torus_map(grid, np.eye(4), random_smooth_field(philox(1), grid, 0.3, 1, lead=(4,)))
    pj = solve_phi_jet(phi, g)
    mj = poincare_metric_jet(g)
    fit = fit_expansion(*ruban_ladder(extension_profile(pj, mj), 4), 4)
    F_jet = log_coefficient_from_jet(energy_density_jet(pj, mj).coeff(2), g)
    assert fit.F == pytest.approx(F_jet, rel=1e-5)
    assert renormalized_functional(fit.F, 4) == pytest.approx(e4_functional(phi, g), rel=1e-3)


def test_odd_demo_constant_invariant():
    d = odd_constant_demo()
    assert d["label"] == "demo"
    assert d["g"]["C"] == pytest.approx(d["C_closed_form"], rel=1e-6)
    assert d["scaled"]["C"] == pytest.approx(d["g"]["C"], rel=1e-6)
    assert d["scaled"]["E_div"][-1] == pytest.approx(2 * d["g"]["E_div"][-1], rel=1e-8)
    with pytest.raises(ValueError):
        odd_constant_demo(n=5)


def test_outputs_serialize():
    r, e = ruban_ladder(einstein_profile(0.25, 1.0, 4), 4)
    assert ladder_csv(r, e).splitlines()[0] == "rho,E"
    assert '"cond"' in fit_json(fit_expansion(r, e, 4))
