"""Euler–Lagrange and obstruction operators for conformal-harmonic maps.

``el4`` is the Euler–Lagrange expression of the four-dimensional energy and
``H = a_4 · el4`` with a_4 = −1/16 is the log coefficient of the formal harmonic
extension. Both are exposed so the normalization can never be applied twice.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .bundle_maps import (
    MapField,
    Section,
    _tangent_array,
    bundle_codifferential,
    pullback_gradient,
    rough_laplacian,
    se_array,
    target_curvature,
)
from .curvature import (
    CO,
    CONTRA,
    bach_array,
    covariant_derivative_array,
    divergence_array,
    divergence_raised,
    laplacian_array,
    ricci_array,
    scalar_curv_array,
)
from .geometry import Metric, diff, gradient, integrate


def a_n(n: int) -> Fraction:
    """(−1)^{n/2−1} / (2^{n−1} (n/2)! (n/2−1)!)."""
    if n % 2 or n < 2:
        raise ValueError("a_n is defined for even n >= 2")
    k = n // 2
    return Fraction((-1) ** (k - 1), 2 ** (n - 1) * math.factorial(k) * math.factorial(k - 1))


def _ricci_up(g: Metric) -> np.ndarray:
    gi = g.inverse_array
    return np.einsum("ia...,jb...,ab...->ij...", gi, gi, ricci_array(g))


def _curvature_endomorphism_on_forms(t: np.ndarray, g: Metric) -> np.ndarray:
    """(⅔ scal g − 2 Ric)^♯ acting on the form index of t, shape (n, ...)."""
    extra = (None,) * (t.ndim - 1 - g.dim)
    ric = np.einsum("jb...,ba...->ja...", ricci_array(g), g.inverse_array)[(slice(None), slice(None)) + extra]
    return (2.0 / 3.0) * scalar_curv_array(g) * t - 2.0 * np.einsum("ja...,a...->j...", ric, t)


# ---------------------------------------------------------------------------
# dimension 4

def el4_array(phi: MapField, g: Metric) -> np.ndarray:
    """δdδTφ + δ((⅔scal g − 2Ric) Tφ) − Se(δTφ)."""
    if g.dim != 4:
        raise ValueError("the four-dimensional operator needs dim 4")
    t, _ = _tangent_array(phi)
    tau = bundle_codifferential(phi, t, g)
    return (
        rough_laplacian(phi, tau, g)
        + bundle_codifferential(phi, _curvature_endomorphism_on_forms(t, g), g)
        - se_array(phi, tau, g, t)
    )


def h4_array(phi: MapField, g: Metric) -> np.ndarray:
    return float(a_n(4)) * el4_array(phi, g)


def el4_operator(phi: MapField, g: Metric) -> Section:
    return Section(phi, el4_array(phi, g))


def h4_operator(phi: MapField, g: Metric) -> Section:
    """H^g(φ) = −(1/16)·el4."""
    return Section(phi, h4_array(phi, g))


def paneitz4(f: np.ndarray, g: Metric) -> np.ndarray:
    """Δ²f + δ((⅔scal g − 2Ric) df) in divergence form."""
    if g.dim != 4:
        raise ValueError("the Paneitz operator here is four-dimensional")
    coef = (2.0 / 3.0) * scalar_curv_array(g) * g.inverse_array - 2.0 * _ricci_up(g)
    flux = np.einsum("ab...,b...->a...", coef, gradient(f, g.grid)) * g.volume_density
    div = sum(diff(flux[a], a, g.grid) for a in range(4))
    return laplacian_array(laplacian_array(f, g), g) - div / g.volume_density


def identity_h4(g: Metric) -> np.ndarray:
    """H of the identity (M,[g]) → (M,g) as a vector field.

    The identity is harmonic, so only δ((⅔scal − 2Ric)^♯) survives; it is
    evaluated as the divergence of the (1,1) tensor ⅔scal·Id − 2Ric^♯.
    """
    n = g.dim
    eye = np.eye(n).reshape((n, n) + (1,) * n)
    ric_mixed = np.einsum("jb...,ba...->ja...", ricci_array(g), g.inverse_array)
    a = (2.0 / 3.0) * scalar_curv_array(g) * eye - 2.0 * ric_mixed  # A_j^a
    return float(a_n(4)) * divergence_array(a, (CO, CONTRA), g)


def identity_h4_closed_form(g: Metric) -> np.ndarray:
    """−∇scal/48 via the contracted Bianchi identity."""
    return -np.einsum("ab...,b...->a...", g.inverse_array, gradient(scalar_curv_array(g), g.grid)) / 48.0


def vector_l2_norm(v: np.ndarray, g: Metric) -> float:
    """L² norm of a tangent vector field of M measured with g."""
    sq = np.einsum("ab...,a...,b...->...", g.g, v, v)
    return math.sqrt(max(integrate(sq, g), 0.0))


def section_l2_norm(v: np.ndarray, g: Metric) -> float:
    return math.sqrt(max(integrate(np.sum(v * v, axis=0), g), 0.0))


@dataclass(frozen=True)
class CHarmonicCheck:
    ok: bool
    residual: float


def check_c_harmonic(phi: MapField, g: Metric, tol: float) -> CHarmonicCheck:
    """‖H^g(φ)‖_{L²} ≤ tol."""
    r = section_l2_norm(h4_array(phi, g), g)
    return CHarmonicCheck(r <= tol, r)


def check_identity_c_harmonic(g: Metric, tol: float) -> CHarmonicCheck:
    r = vector_l2_norm(identity_h4(g), g)
    return CHarmonicCheck(r <= tol, r)


# ---------------------------------------------------------------------------
# GJMS on Einstein manifolds

def gjms_shift(n: int, j: int) -> Fraction:
    """c_j = (n+2j−2)(n−2j) / (4n(n−1))."""
    return Fraction((n + 2 * j - 2) * (n - 2 * j), 4 * n * (n - 1))


def _gjms_sign(convention: str) -> int:
    if convention == "covariant":
        return 1
    if convention == "literal":
        return -1
    raise ValueError(f"unknown convention {convention!r}")


def gjms_einstein(f: np.ndarray, g: Metric, n: int, scal: float, convention: str = "covariant") -> np.ndarray:
    """∏_{j=1}^{n/2} (Δ ± c_j scal) f with Δ = δd.

    ``covariant`` uses +c_j scal, the sign under which the product is the
    conformally covariant operator for the positive Laplacian (it agrees with
    Paneitz-on-Einstein Δ(Δ + scal/6) for n = 4 and with the sphere spectrum).
    ``literal`` uses −c_j scal, the product written for the negative
    Laplacian but evaluated with Δ = δd.
    """
    if n % 2:
        raise ValueError("n must be even")
    s = _gjms_sign(convention)
    out = np.asarray(f, dtype=float)
    for j in range(1, n // 2 + 1):
        out = laplacian_array(out, g) + s * float(gjms_shift(n, j)) * scal * out
    return out


def gjms_einstein_symbol(mu, n: int, scal, convention: str = "covariant"):
    """The GJMS product on a Δ-eigenfunction with eigenvalue mu (exact for Fractions)."""
    s = _gjms_sign(convention)
    out = Fraction(1) if isinstance(mu, (int, Fraction)) else 1.0
    for j in range(1, n // 2 + 1):
        out = out * (mu + s * gjms_shift(n, j) * scal)
    return out


def paneitz_einstein_symbol(mu, scal):
    """Paneitz on an Einstein 4-manifold: Δ(Δ + scal/6)."""
    return mu * (mu + Fraction(scal) / 6)


def sphere_eigenvalue(n: int, k: int) -> int:
    """k-th eigenvalue k(k+n−1) of δd on the unit n-sphere."""
    return k * (k + n - 1)


# ---------------------------------------------------------------------------
# dimension 6

def c6_einstein_operator(phi: MapField, g: Metric, lam: float) -> np.ndarray:
    """(δd − Se + 16λ)(δd − Se + 24λ)δTφ − 2 Σ_i R^h_{δTφ, Tφe_i}(∇_{e_i}δTφ); equals 384·H."""
    if g.dim != 6:
        raise ValueError("the six-dimensional operator needs dim 6")
    t, _ = _tangent_array(phi)
    tau = bundle_codifferential(phi, t, g)

    def shifted(v, c):
        return rough_laplacian(phi, v, g) - se_array(phi, v, g, t) + c * v

    main = shifted(shifted(tau, 24.0 * lam), 16.0 * lam)
    if phi.target.is_flat:
        return main
    nab = pullback_gradient(phi, tau, dphi=t)  # nab[b] = ∇_b τ
    gi = g.inverse_array
    corr = np.zeros_like(tau)
    for a in range(g.dim):
        for b in range(g.dim):
            corr += gi[a, b] * target_curvature(phi.target, tau, t[a], nab[b])
    return main - 2.0 * corr


def c6_identity_residual(g: Metric) -> np.ndarray:
    """(Δ + ¼scal − (7/4)Ric) dscal − (5/2) tr(∇_Ric Ric) + 20 δB + (5/4) d|Ric|², a 1-form.

    Δ is the rough Laplacian ∇*∇ on 1-forms; tr(∇_Ric Ric)_j = Ric^{ia} ∇_i Ric_aj.
    """
    if g.dim != 6:
        raise ValueError("the six-dimensional identity condition needs dim 6")
    div_b = divergence_array(bach_array(g), (CO, CO), g)
    gi = g.inverse_array
    scal = scalar_curv_array(g)
    ric = ricci_array(g)
    ds = gradient(scal, g.grid)
    nab_ds = np.einsum("ab...,bj...->aj...", gi, covariant_derivative_array(ds, (CO,), g))
    rough = -divergence_raised(nab_ds, (CO,), g)
    del nab_ds
    ric_mixed = np.einsum("jb...,ba...->ja...", ric, gi)
    endo = 0.25 * scal * ds - 1.75 * np.einsum("ja...,a...->j...", ric_mixed, ds)
    nric = covariant_derivative_array(ric, (CO, CO), g)  # nric[i, a, j] = ∇_i Ric_aj
    tr_term = np.einsum("ia...,iaj...->j...", _ricci_up(g), nric)
    del nric
    ric_sq = np.einsum("ia...,jb...,ij...,ab...->...", gi, gi, ric, ric)
    return rough + endo - 2.5 * tr_term + 20.0 * div_b + 1.25 * gradient(ric_sq, g.grid)


def one_form_l2_norm(a: np.ndarray, g: Metric) -> float:
    sq = np.einsum("ab...,a...,b...->...", g.inverse_array, a, a)
    return math.sqrt(max(integrate(sq, g), 0.0))
