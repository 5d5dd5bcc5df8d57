import numpy as np
import pytest

from charmonic.bundle_maps import identity_map, random_smooth_field, sphere_map, torus_map
from charmonic.flow import StepUnderflow, _state, descent_direction, flow_step, run_flow
from charmonic.geometry import make_flat_torus
from conftest import philox


def _perturbed(grid, seed=0, amp=0.2):
    return torus_map(grid, np.eye(4), random_smooth_field(philox(seed), grid, amp, 1, lead=(4,)))


def test_flow_converges_monotone(torus8):
    grid, h = torus8
    rep = run_flow(_perturbed(grid), h, tol=1e-6)
    assert rep.converged and rep.h_norms[-1] <= 1e-6
    assert rep.monotone()
    assert rep.trajectory_csv().splitlines()[0] == "iter,E4,H_norm,step"


def test_unpreconditioned_flow_decreases(torus8):
    grid, h = torus8
    rep = run_flow(_perturbed(grid, 1), h, tol=1e-12, max_iter=5, precondition=False)
    assert rep.monotone() and rep.energies[-1] < rep.energies[0]
    assert not rep.converged


def test_single_step_armijo(torus8):
    grid, h = torus8
    s0 = _state(_perturbed(grid, 2), h)
    s1, step = flow_step(s0, h, 1.0, precondition=True)
    assert s1.energy < s0.energy and step > 0


def test_step_underflow_at_critical_point(torus8):
    grid, h = torus8
    s0 = _state(identity_map(grid), h)
    with pytest.raises(StepUnderflow):
        flow_step(s0, h, 1.0)


def test_flow_stationary_start(torus8):
    grid, h = torus8
    rep = run_flow(identity_map(grid), h)
    assert rep.converged and rep.steps == []


def test_flow_rejects_wrong_dimension():
    grid, g = make_flat_torus(2, (8, 8))
    with pytest.raises(ValueError):
        run_flow(identity_map(grid), g)


def test_sphere_direction_is_tangent(torus8):
    grid, h = torus8
    x = random_smooth_field(philox(3), grid, 0.3, 1, lead=(3,))
    x[2] += 1
    phi = sphere_map(grid, x)
    d = descent_direction(_state(phi, h), h, True)
    assert np.max(np.abs(np.sum(d * phi.periodic, axis=0))) < 1e-12
