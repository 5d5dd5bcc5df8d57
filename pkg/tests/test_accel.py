import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from charmonic import _accel
from conftest import philox

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not importable")


@pytest.fixture
def both():
    prev = _accel.get_backend()

    def run(fn):
        out = {}
        for b in ("numpy", "numba"):
            _accel.set_backend(b)
            out[b] = fn()
        return out

    yield run
    _accel.set_backend(prev)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.sampled_from([2, 4, 6]))
def test_spd_factor_backends_agree(seed, n):
    rng = philox(seed)
    m = rng.normal(size=(20, n, n))
    a = np.einsum("pij,pkj->pik", m, m) + n * np.eye(n)
    prev = _accel.get_backend()
    try:
        res = {}
        for b in ("numpy", "numba"):
            _accel.set_backend(b)
            res[b] = _accel.spd_factor(a)
    finally:
        _accel.set_backend(prev)
    for x, y in zip(res["numpy"], res["numba"]):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-12)
    chol, inv, sqrtdet, frame = res["numba"]
    assert np.allclose(np.einsum("pij,pjk->pik", a, inv), np.eye(n), atol=1e-10)
    assert np.allclose(sqrtdet**2, np.linalg.det(a))
    assert np.allclose(np.einsum("pia,pab,pjb->pij", frame, a, frame), np.eye(n), atol=1e-10)


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_spd_factor_rejects_indefinite(backend):
    prev = _accel.set_backend(backend)
    try:
        with pytest.raises(_accel.NotPositiveDefinite):
            _accel.spd_factor(np.array([[[1.0, 0.0], [0.0, -1.0]]]))
    finally:
        _accel.set_backend(prev)


def test_fd4_backends_agree(both):
    a = philox(1).normal(size=(3, 16, 5))
    out = both(lambda: _accel.fd4_derivative(a, 1, 0.1))
    assert np.allclose(out["numpy"], out["numba"], atol=1e-12)


def test_sphere_se_backends_agree(both):
    rng = philox(2)
    x = rng.normal(size=(3, 50))
    dphi = rng.normal(size=(4, 3, 50))
    m = rng.normal(size=(50, 4, 4))
    ginv = np.ascontiguousarray(np.moveaxis(np.einsum("pij,pkj->pik", m, m) + 4 * np.eye(4), 0, -1))
    out = both(lambda: _accel.sphere_se(x, dphi, ginv))
    assert np.allclose(out["numpy"], out["numba"], atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")
