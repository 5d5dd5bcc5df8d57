import numpy as np
import pytest

from charmonic.bundle_maps import euclidean_map, identity_map, project_tangent, random_smooth_field, sphere_map
from charmonic.geometry import conformal_metric, integrate, make_flat_torus, metric_from_array
from charmonic.linearization import (
    central_difference,
    d_nablaT_dg,
    d_nablaT_dphi,
    d_P4_dg,
    d_P4_dphi,
    d_tension_dg,
    d_tension_dphi,
    fd_order,
    fd_parents,
    gauge_residual,
    newton_c_harmonic,
    p4_identity_parent_g,
    p4_identity_parent_phi,
    p4_residual,
    solve_conformal_gauge,
)
from conftest import philox


@pytest.fixture(scope="module")
def sphere_setup():
    rng = philox(11)
    grid, flat = make_flat_torus(2, (64, 64))
    g = conformal_metric(flat, random_smooth_field(rng, grid, 0.2, 1))
    x = random_smooth_field(rng, grid, 0.3, 1, lead=(3,))
    x[2] += 1
    phi = sphere_map(grid, x)
    v = random_smooth_field(rng, grid, 0.5, 1, lead=(3,))
    k = random_smooth_field(rng, grid, 0.3, 1, lead=(2, 2))
    return phi, g, v, 0.5 * (k + k.swapaxes(0, 1))


def _proj(phi):
    return lambda d: project_tangent(phi.periodic, d)


@pytest.mark.parametrize("name,formula,uses", [
    ("tension_phi", d_tension_dphi, "v"),
    ("nablaT_phi", d_nablaT_dphi, "v"),
    ("tension_g", d_tension_dg, "g"),
    ("nablaT_g", d_nablaT_dg, "g"),
])
def test_sphere_variations_second_order(sphere_setup, name, formula, uses):
    phi, g, v, gd = sphere_setup
    parents = fd_parents(phi, g, v=v, gdot=gd)
    lin = formula(phi, g, v if uses == "v" else gd)
    rep = fd_order(parents[name], lin, project=_proj(phi) if uses == "v" else None)
    assert not rep.exact
    assert 1.9 <= rep.order <= 2.1


def test_flat_target_variations_are_exact():
    rng = philox(12)
    grid, flat = make_flat_torus(2, (16, 16))
    g = conformal_metric(flat, random_smooth_field(rng, grid, 0.2, 1))
    phi = euclidean_map(grid, random_smooth_field(rng, grid, 0.5, 1, lead=(3,)))
    v = random_smooth_field(rng, grid, 0.5, 1, lead=(3,))
    p = fd_parents(phi, g, v=v)
    for name, formula in (("tension_phi", d_tension_dphi), ("nablaT_phi", d_nablaT_dphi)):
        rep = fd_order(p[name], formula(phi, g, v))
        assert rep.exact and max(rep.errors) <= 1e-10


def test_P4_variations_at_identity(torus8):
    grid, h = torus8
    rng = philox(13)
    ident = identity_map(grid)
    v = random_smooth_field(rng, grid, 0.3, 1, lead=(4,))
    rep = fd_order(p4_identity_parent_phi(ident, h, v), d_P4_dphi(h, v))
    assert rep.exact
    k = random_smooth_field(rng, grid, 0.2, 1, lead=(4, 4))
    gd = 0.5 * (k + k.swapaxes(0, 1))
    rep = fd_order(p4_identity_parent_g(ident, h, gd), d_P4_dg(h, gd))
    assert 1.9 <= rep.order <= 2.1


def test_central_difference_of_quadratic():
    assert np.allclose(central_difference(lambda t: np.array([t**2 + 3 * t]), 0.1), [3.0])


def test_newton_flat_is_immediate(torus8):
    grid, h = torus8
    rep = newton_c_harmonic(identity_map(grid), h)
    assert rep.converged and len(rep.residuals) == 1
    assert "scal = 0" in rep.hypothesis


@pytest.mark.parametrize("generic", [False, True])
def test_newton_converges(torus8, generic):
    grid, h = torus8
    rng = philox(14)
    base = h
    if generic:
        k = random_smooth_field(rng, grid, 0.05, 1, lead=(4, 4))
        base = metric_from_array(grid, h.g + 0.5 * (k + k.swapaxes(0, 1)))
    g = conformal_metric(base, random_smooth_field(rng, grid, 0.05, 1))
    rep = newton_c_harmonic(identity_map(grid), g)
    assert rep.converged and rep.residuals[-1] <= 1e-8
    assert rep.tail_ratio() <= 0.1
    assert p4_residual(rep.phi, g) == rep.residuals[-1]
    assert rep.history_csv().startswith("iter,residual")


def test_newton_reports_non_convergence(torus8):
    grid, h = torus8
    rng = philox(15)
    k = random_smooth_field(rng, grid, 0.05, 1, lead=(4, 4))
    g = metric_from_array(grid, h.g + 0.5 * (k + k.swapaxes(0, 1)))
    rep = newton_c_harmonic(identity_map(grid), g, max_iter=1, tol=1e-30)
    assert not rep.converged and rep.message == "max_iter reached"


def test_gauge_solves_and_is_zero_mean(torus8):
    grid, h = torus8
    rng = philox(16)
    k = random_smooth_field(rng, grid, 0.05, 1, lead=(4, 4))
    g = conformal_metric(metric_from_array(grid, h.g + 0.5 * (k + k.swapaxes(0, 1))),
                         random_smooth_field(rng, grid, 0.05, 1))
    phi = newton_c_harmonic(identity_map(grid), g).phi
    rep = solve_conformal_gauge(phi, g)
    assert rep.converged
    r = gauge_residual(phi, g, rep.omega)
    assert np.sqrt(integrate(r**2, g)) <= 1e-10
    assert abs(integrate(rep.omega, g)) <= 1e-12 * integrate(np.ones(grid.shape), g)


def test_gauge_trivial_for_harmonic(torus8):
    grid, h = torus8
    rep = solve_conformal_gauge(identity_map(grid), h)
    assert rep.converged and np.max(np.abs(rep.omega)) <= 1e-12


def test_gauge_needs_self_map():
    grid, g = make_flat_torus(4, (8,) * 4)
    phi = euclidean_map(grid, np.zeros((2,) + grid.shape))
    with pytest.raises(ValueError):
        gauge_residual(phi, g, np.zeros(grid.shape))
