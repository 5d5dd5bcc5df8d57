import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from charmonic.bundle_maps import random_smooth_field
from charmonic.geometry import (
    COVARIANT,
    ChartGrid,
    GridError,
    TensorField,
    apply_fourier_multiplier,
    conformal_metric,
    diff,
    dumps_field,
    flat_laplacian_symbol,
    grid_laplacian_symbol,
    integrate,
    loads_field,
    make_flat_torus,
    metric_from_array,
    total_volume,
)
from conftest import philox


@pytest.mark.parametrize("sizes", [(7, 8), (8, 6), (8,)])
def test_grid_rejects_bad_sizes(sizes):
    with pytest.raises(GridError):
        ChartGrid(2, sizes)


def test_grid_rejects_unknown_method():
    with pytest.raises(GridError):
        ChartGrid(2, (8, 8), method="fd2")


def test_flat_metric_is_identity():
    _, g = make_flat_torus(4, (8,) * 4)
    assert g.identity_residual() == 0.0
    assert np.allclose(g.inverse_array, g.g)
    assert total_volume(g) == pytest.approx((2 * np.pi) ** 4)


def test_odd_dimension_rejected():
    with pytest.raises(GridError):
        ChartGrid(3, (8, 8, 8))


@given(k=st.integers(1, 3), axis=st.integers(0, 1))
def test_spectral_derivative_exact_on_trig(k, axis):
    grid, _ = make_flat_torus(2, (16, 16))
    x = grid.coordinate(axis)
    assert np.max(np.abs(diff(np.sin(k * x), axis, grid) - k * np.cos(k * x))) < 1e-12


def test_fd4_fourth_order():
    errs = []
    for n in (16, 32):
        grid = ChartGrid(2, (n, n), method="fd4")
        x = grid.coordinate(0)
        errs.append(np.max(np.abs(diff(np.sin(x), 0, grid) - np.cos(x))))
    assert np.log2(errs[0] / errs[1]) == pytest.approx(4.0, abs=0.1)


def test_grid_symbol_zeroes_nyquist():
    grid, _ = make_flat_torus(2, (8, 8))
    full, disc = flat_laplacian_symbol(grid), grid_laplacian_symbol(grid)
    assert disc[4, 0] == 0.0 and full[4, 0] == 16.0
    assert disc[1, 1] == full[1, 1] == 2.0


def test_fourier_multiplier_matches_laplacian():
    grid, _ = make_flat_torus(2, (16, 16))
    x, y = grid.coordinates()
    f = np.sin(2 * x) * np.cos(y)
    assert np.allclose(apply_fourier_multiplier(f, flat_laplacian_symbol(grid), grid), 5 * f)


def test_conformal_metric_volume():
    grid, flat = make_flat_torus(2, (16, 16))
    om = random_smooth_field(philox(1), grid, 0.2, 1)
    g = conformal_metric(flat, om)
    assert integrate(np.ones(grid.shape), g) == pytest.approx(integrate(np.exp(2 * om), flat))


def test_conformal_metric_composes():
    grid, flat = make_flat_torus(2, (8, 8))
    rng = philox(2)
    a, b = random_smooth_field(rng, grid, 0.2, 1), random_smooth_field(rng, grid, 0.2, 1)
    assert np.allclose(conformal_metric(conformal_metric(flat, a), b).g, conformal_metric(flat, a + b).g)


def test_metric_not_positive_definite():
    grid, flat = make_flat_torus(2, (8, 8))
    bad = flat.g.copy()
    bad[0, 0] = -1.0
    with pytest.raises(ValueError):
        metric_from_array(grid, bad).inverse_array


def test_tensor_field_json_roundtrip():
    grid, g = make_flat_torus(2, (8, 8))
    f = TensorField(grid, (COVARIANT, COVARIANT), g.g.copy(), (("sym", 0, 1),))
    back = loads_field(dumps_field(f))
    assert np.array_equal(back.data, f.data) and back.variance == f.variance
    assert back.symmetry_violation() == 0.0


def test_tensor_field_shape_checked():
    grid, _ = make_flat_torus(2, (8, 8))
    with pytest.raises(ValueError):
        TensorField(grid, (COVARIANT,), np.zeros((3, 8, 8)))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), c=st.floats(-2, 2))
def test_integral_linear(seed, c):
    grid, g = make_flat_torus(2, (8, 8))
    rng = philox(seed)
    a, b = rng.normal(size=grid.shape), rng.normal(size=grid.shape)
    assert integrate(a + c * b, g) == pytest.approx(integrate(a, g) + c * integrate(b, g), abs=1e-9)
