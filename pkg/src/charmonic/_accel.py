"""Hot pointwise kernels with a numba path and a pure-numpy fallback.

The backend is chosen at import time from the ``CHARMONIC_NUMBA`` environment
variable (``0`` disables the JIT path) and can be switched at runtime with
:func:`set_backend`, which is what the benchmark and the equivalence tests use.

Spectral differentiation is not here: it is FFT-bound and stays on scipy.
"""
from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_backend = "numba" if HAVE_NUMBA and os.environ.get("CHARMONIC_NUMBA", "1") != "0" else "numpy"


class NotPositiveDefinite(ValueError):
    pass


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Select ``"numba"`` or ``"numpy"``; returns the previous backend."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    previous, _backend = _backend, name
    return previous


# --------------------------------------------------------------------------
# batched SPD factorisation: cholesky factor, inverse, sqrt(det), frame

def _spd_factor_numpy(a):
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("metric is not positive definite at some grid point") from exc
    n = a.shape[-1]
    eye = np.broadcast_to(np.eye(n), a.shape)
    frame = np.linalg.solve(chol, eye)  # L^{-1}
    inv = np.einsum("pki,pkj->pij", frame, frame)
    sqrtdet = np.prod(np.diagonal(chol, axis1=1, axis2=2), axis=1)
    return chol, inv, sqrtdet, frame


if HAVE_NUMBA:

    @njit(cache=True)
    def _spd_factor_kernel(a, chol, inv, sqrtdet, frame):
        npts, n, _ = a.shape
        for p in range(npts):
            for i in range(n):
                for j in range(i + 1):
                    s = a[p, i, j]
                    for k in range(j):
                        s -= chol[p, i, k] * chol[p, j, k]
                    if i == j:
                        if s <= 0.0:
                            return False
                        chol[p, i, i] = np.sqrt(s)
                    else:
                        chol[p, i, j] = s / chol[p, j, j]
            # forward substitution for L^{-1}
            for col in range(n):
                for i in range(n):
                    s = 1.0 if i == col else 0.0
                    for k in range(i):
                        s -= chol[p, i, k] * frame[p, k, col]
                    frame[p, i, col] = s / chol[p, i, i]
            d = 1.0
            for i in range(n):
                d *= chol[p, i, i]
            sqrtdet[p] = d
            for i in range(n):
                for j in range(n):
                    s = 0.0
                    for k in range(n):
                        s += frame[p, k, i] * frame[p, k, j]
                    inv[p, i, j] = s
        return True


def _spd_factor_numba(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    chol = np.zeros_like(a)
    inv = np.empty_like(a)
    frame = np.zeros_like(a)
    sqrtdet = np.empty(a.shape[0])
    if not _spd_factor_kernel(a, chol, inv, sqrtdet, frame):
        raise NotPositiveDefinite("metric is not positive definite at some grid point")
    return chol, inv, sqrtdet, frame


def spd_factor(a):
    """Factor a stack ``a[p]`` of SPD matrices.

    Returns ``(L, a^{-1}, sqrt(det a), L^{-1})`` with ``a = L L^T``; the rows of
    ``L^{-1}`` are an orthonormal frame for ``a`` expressed in coordinates.
    """
    if _backend == "numba":
        return _spd_factor_numba(a)
    return _spd_factor_numpy(a)


# --------------------------------------------------------------------------
# periodic 4th-order central difference along the middle axis of (pre, N, post)

_FD4 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def _fd4_numpy(a, h):
    out = np.zeros_like(a)
    for w, shift in zip(_FD4, (2, 1, 0, -1, -2)):
        if w:
            out += w * np.roll(a, shift, axis=1)
    return out / h


if HAVE_NUMBA:

    @njit(cache=True)
    def _fd4_kernel(a, h, out):
        pre, n, post = a.shape
        c1 = 8.0 / (12.0 * h)
        c2 = 1.0 / (12.0 * h)
        for i in range(pre):
            for j in range(n):
                jp1 = (j + 1) % n
                jp2 = (j + 2) % n
                jm1 = (j - 1) % n
                jm2 = (j - 2) % n
                for k in range(post):
                    out[i, j, k] = c1 * (a[i, jp1, k] - a[i, jm1, k]) - c2 * (a[i, jp2, k] - a[i, jm2, k])


def fd4_derivative(a, axis, h):
    """Periodic 4th-order central difference of ``a`` along ``axis``."""
    shape = a.shape
    pre = int(np.prod(shape[:axis], dtype=np.int64))
    post = int(np.prod(shape[axis + 1:], dtype=np.int64))
    a3 = np.ascontiguousarray(a, dtype=np.float64).reshape(pre, shape[axis], post)
    if _backend == "numba":
        out = np.empty_like(a3)
        _fd4_kernel(a3, float(h), out)
    else:
        out = _fd4_numpy(a3, h)
    return out.reshape(shape)


# --------------------------------------------------------------------------
# round-sphere curvature endomorphism: |Tφ|² X - g^{ab} <X, ∂_b φ> ∂_a φ

def _sphere_se_numpy(x, dphi, ginv):
    # x: (m, P), dphi: (n, m, P), ginv: (n, n, P)
    energy = np.einsum("abp,amp,bmp->p", ginv, dphi, dphi)
    proj = np.einsum("mp,bmp->bp", x, dphi)
    return energy * x - np.einsum("abp,bp,amp->mp", ginv, proj, dphi)


if HAVE_NUMBA:

    @njit(cache=True)
    def _sphere_se_kernel(x, dphi, ginv, out):
        # point index innermost: every array is stored point-last
        n, m, npts = dphi.shape
        energy = np.zeros(npts)
        proj = np.zeros((n, npts))
        for a in range(n):
            for b in range(n):
                for i in range(m):
                    for p in range(npts):
                        energy[p] += ginv[a, b, p] * dphi[a, i, p] * dphi[b, i, p]
        for b in range(n):
            for i in range(m):
                for p in range(npts):
                    proj[b, p] += x[i, p] * dphi[b, i, p]
        for i in range(m):
            for p in range(npts):
                out[i, p] = energy[p] * x[i, p]
        for a in range(n):
            for b in range(n):
                for i in range(m):
                    for p in range(npts):
                        out[i, p] -= ginv[a, b, p] * proj[b, p] * dphi[a, i, p]


def sphere_se(x, dphi, ginv):
    """Flattened-grid evaluation of the unit-sphere curvature endomorphism."""
    if _backend == "numba":
        x = np.ascontiguousarray(x, dtype=np.float64)
        dphi = np.ascontiguousarray(dphi, dtype=np.float64)
        ginv = np.ascontiguousarray(ginv, dtype=np.float64)
        out = np.empty_like(x)
        _sphere_se_kernel(x, dphi, ginv, out)
        return out
    return _sphere_se_numpy(x, dphi, ginv)
