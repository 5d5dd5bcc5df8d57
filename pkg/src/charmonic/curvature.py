"""Curvature of a metric and the first-order operators built on it.

Conventions: R(X,Y)Z = ∇_X∇_Y Z − ∇_Y∇_X Z − ∇_[X,Y] Z, R_ijkl = g(R(∂_i,∂_j)∂_k, ∂_l),
Ric_jk = R_ijk^i, so the round unit sphere has positive scalar curvature n(n−1).
δ is the formal adjoint of d and Δ = δd has nonnegative spectrum.
"""
from __future__ import annotations

import numpy as np

from .geometry import COVARIANT, CONTRAVARIANT, Metric, TensorField, diff, gradient

CO, CONTRA = COVARIANT, CONTRAVARIANT


class DimensionError(ValueError):
    pass


def christoffel_array(g: Metric) -> np.ndarray:
    """Γ[k, i, j] = Γ^k_ij."""

    def build():
        dg = gradient(g.g, g.grid)  # dg[c, i, j] = ∂_c g_ij
        lowered = np.einsum("ijl...->lij...", dg) + np.einsum("jil...->lij...", dg)
        lowered -= dg
        lowered *= 0.5
        del dg
        return np.einsum("kl...,lij...->kij...", g.inverse_array, lowered)

    return g.cached("christoffel", build)


def christoffel(g: Metric) -> TensorField:
    return TensorField(g.grid, (CONTRA, CO, CO), christoffel_array(g), (("sym", 1, 2),))


def riemann_array(g: Metric) -> np.ndarray:
    """R[i, j, k, l] = R_ijkl."""

    def build():
        gam = christoffel_array(g)
        dgam = gradient(gam, g.grid)  # dgam[i, m, j, k] = ∂_i Γ^m_jk
        up = (
            np.einsum("imjk...->ijkm...", dgam)
            - np.einsum("jmik...->ijkm...", dgam)
            + np.einsum("mip...,pjk...->ijkm...", gam, gam)
            - np.einsum("mjp...,pik...->ijkm...", gam, gam)
        )
        return np.einsum("lm...,ijkm...->ijkl...", g.g, up)

    return g.cached("riemann", build)


def riemann(g: Metric) -> TensorField:
    return TensorField(
        g.grid, (CO,) * 4, riemann_array(g), (("anti", 0, 1), ("anti", 2, 3))
    )


def ricci_array(g: Metric) -> np.ndarray:
    """Ric_jk = R_ijk^i, assembled from Γ without forming the full Riemann tensor."""

    def build():
        gam = christoffel_array(g)
        div = sum(diff(gam[i], i, g.grid) for i in range(g.dim))
        trace_gam = np.einsum("iik...->k...", gam)
        return (
            div
            - gradient(trace_gam, g.grid)
            + np.einsum("p...,pjk...->jk...", trace_gam, gam)
            - np.einsum("ijp...,pik...->jk...", gam, gam)
        )

    return g.cached("ricci", build)


def ricci(g: Metric) -> TensorField:
    return TensorField(g.grid, (CO, CO), ricci_array(g), (("sym", 0, 1),))


def scalar_curv_array(g: Metric) -> np.ndarray:
    return g.cached("scal", lambda: np.einsum("jk...,jk...->...", g.inverse_array, ricci_array(g)))


def scalar_curv(g: Metric) -> TensorField:
    return TensorField.scalar(g.grid, scalar_curv_array(g))


def schouten_array(g: Metric) -> np.ndarray:
    n = g.dim
    if n < 3:
        raise DimensionError("the Schouten tensor needs dim >= 3")

    def build():
        return ricci_array(g) / (n - 2) - scalar_curv_array(g) * g.g / (2.0 * (n - 1) * (n - 2))

    return g.cached("schouten", build)


def schouten(g: Metric) -> TensorField:
    return TensorField(g.grid, (CO, CO), schouten_array(g), (("sym", 0, 1),))


def kulkarni_nomizu(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a ⊙ b)_ijkl = a_il b_jk + a_jk b_il − a_ik b_jl − a_jl b_ik."""
    return (
        np.einsum("il...,jk...->ijkl...", a, b)
        + np.einsum("jk...,il...->ijkl...", a, b)
        - np.einsum("ik...,jl...->ijkl...", a, b)
        - np.einsum("jl...,ik...->ijkl...", a, b)
    )


def weyl_array(g: Metric) -> np.ndarray:
    if g.dim < 4:
        raise DimensionError("the Weyl tensor needs dim >= 4")
    return g.cached("weyl", lambda: riemann_array(g) - kulkarni_nomizu(schouten_array(g), g.g))


def weyl(g: Metric) -> TensorField:
    return TensorField(g.grid, (CO,) * 4, weyl_array(g), (("anti", 0, 1), ("anti", 2, 3)))


# ---------------------------------------------------------------------------
# covariant derivatives

def covariant_derivative_array(t: np.ndarray, variance, g: Metric) -> np.ndarray:
    """∇T with the derivative index placed first."""
    gam = christoffel_array(g)
    n = g.dim
    rank = len(variance)
    out = gradient(t, g.grid)
    gshape = g.grid.shape
    for p, v in enumerate(variance):
        moved = np.moveaxis(t, p, 0)
        rest = moved.shape[1:rank]
        flat = moved.reshape((n, -1) + gshape)
        if v == CO:
            corr = -np.einsum("scq...,sr...->cqr...", gam, flat)
        else:
            corr = np.einsum("qcs...,sr...->cqr...", gam, flat)
        corr = corr.reshape((n, n) + rest + gshape)
        out += np.moveaxis(corr, 1, p + 1)
        del corr
    return out


def covariant_derivative(field: TensorField, g: Metric) -> TensorField:
    data = covariant_derivative_array(field.data, field.variance, g)
    return TensorField(g.grid, (CO,) + field.variance, data)


def divergence_raised(t_up: np.ndarray, rest, g: Metric) -> np.ndarray:
    """∇_a T^a_{…} for a tensor whose first index is already raised.

    The contracted index is handled in divergence form, (1/√g)∂_a(√g T^a…), and
    only the remaining indices get Γ corrections, so nothing above the input
    rank is ever allocated.
    """
    gam = christoffel_array(g)
    n = g.dim
    gshape = g.grid.shape
    sq = g.volume_density
    out = sum(diff(t_up[a] * sq, a, g.grid) for a in range(n)) / sq
    for p, v in enumerate(rest):
        moved = np.moveaxis(t_up, p + 1, 1)
        others = moved.shape[2 : 2 + len(rest) - 1]
        flat = moved.reshape((n, n, -1) + gshape)
        if v == CO:
            corr = -np.einsum("saq...,asr...->qr...", gam, flat)
        else:
            corr = np.einsum("qas...,asr...->qr...", gam, flat)
        out += np.moveaxis(corr.reshape((n,) + others + gshape), 0, p)
        del corr
    return out


def divergence_array(t: np.ndarray, variance, g: Metric) -> np.ndarray:
    """δT = −g^{ij}∇_i T_{j…}; first index must be covariant."""
    if not variance or variance[0] != CO:
        raise ValueError("divergence needs a covariant first index")
    if len(variance) == 1:
        return codifferential(t, g)
    t_up = np.einsum("ab...,b...->a...", g.inverse_array[(slice(None), slice(None)) + (None,) * (len(variance) - 1)], t)
    return -divergence_raised(t_up, tuple(variance[1:]), g)


def riemann_contract(g: Metric, p_mixed: np.ndarray) -> np.ndarray:
    """X_ij = R_{aijc} P^{ac} given P^a_m = P^{ac} g_cm, built one derivative direction at a time."""
    gam = christoffel_array(g)
    n = g.dim
    out = np.zeros((n, n) + g.grid.shape)
    for d in range(n):
        for m in range(n):
            dgam = diff(gam[m], d, g.grid)  # ∂_d Γ^m_ij
            out += dgam * p_mixed[d, m]
            out[d] -= np.einsum("aj...,a...->j...", dgam, p_mixed[:, m])
    v = np.einsum("map...,am...->p...", gam, p_mixed)
    out += np.einsum("p...,pij...->ij...", v, gam)
    k = np.einsum("paj...,am...->mpj...", gam, p_mixed)
    out -= np.einsum("mip...,mpj...->ij...", gam, k)
    return out


def divergence(field: TensorField, g: Metric) -> TensorField:
    return TensorField(g.grid, field.variance[1:], divergence_array(field.data, field.variance, g))


def codifferential(alpha: np.ndarray, g: Metric) -> np.ndarray:
    """δα = −(1/√g) ∂_a(√g g^{ab} α_b…) for arrays whose first index is a form index.

    Trailing non-grid indices (e.g. target components) are carried along. The
    divergence form keeps the discrete operator exactly adjoint to ``d``.
    """
    sq = g.volume_density
    extra = alpha.ndim - 1 - g.dim
    pad = (slice(None), slice(None)) + (None,) * extra
    flux = np.einsum("ab...,b...->a...", g.inverse_array[pad], alpha) * sq
    total = sum(diff(flux[a], a, g.grid) for a in range(g.dim))
    return -total / sq


def exterior_derivative(f: np.ndarray, g: Metric) -> np.ndarray:
    return gradient(f, g.grid)


def laplacian_array(f: np.ndarray, g: Metric) -> np.ndarray:
    """Δf = δdf, nonnegative spectrum."""
    return codifferential(gradient(f, g.grid), g)


def laplacian(f, g: Metric) -> TensorField:
    arr = f.data if isinstance(f, TensorField) else np.asarray(f, dtype=float)
    return TensorField.scalar(g.grid, laplacian_array(arr, g))


def bach_array(g: Metric) -> np.ndarray:
    """Bach tensor evaluated in a pointwise g-orthonormal frame e_k.

    B(X,Y) = Σ_k (∇_{e_k}∇_{e_k}Sc)(X,Y) − (∇_{e_k}∇_Y Sc)(X,e_k) − Sc(W'_{e_k,X}Y, e_k)

    where W' is the Weyl tensor read with the opposite curvature sign,
    W'_{X,Y} = −W(X,Y). With that reading the result is conformally covariant,
    B(e^{2ω}g) = e^{−2ω}B(g) in dim 4; with the module's own sign it is not.
    """

    def build():
        sc = schouten_array(g)
        e = g.frame  # e[k, a]
        gf = np.einsum("ka...,kb...->ab...", e, e)  # Σ_k e_k ⊗ e_k
        nab = covariant_derivative_array(sc, (CO, CO), g)  # nab[a, i, j] = ∇_a Sc_ij
        up_rough = np.einsum("ab...,bij...->aij...", gf, nab)
        up_mixed = np.einsum("ab...,jib...->aji...", gf, nab)  # ∇_j Sc_ib, b raised and first
        del nab
        rough = divergence_raised(up_rough, (CO, CO), g)
        del up_rough
        mixed = np.swapaxes(divergence_raised(up_mixed, (CO, CO), g), 0, 1)
        del up_mixed
        sc_up = np.einsum("ab...,cd...,bd...->ac...", gf, gf, sc)
        sc_mixed = np.einsum("ac...,cm...->am...", sc_up, g.g)
        # W_{aijc}Sc^{ac} with W = R − Sc⊙g expanded algebraically
        norm2 = np.einsum("ac...,ac...->...", sc, sc_up)
        tr = np.einsum("ac...,ac...->...", gf, sc)
        sq = np.einsum("ia...,ab...,bj...->ij...", sc, gf, sc)
        wterm = riemann_contract(g, sc_mixed) - (norm2 * g.g + tr * sc - 2.0 * sq)
        return rough - mixed + wterm

    return g.cached("bach", build)


def bach(g: Metric) -> TensorField:
    return TensorField(g.grid, (CO, CO), bach_array(g), (("sym", 0, 1),))


def trace(t: np.ndarray, g: Metric) -> np.ndarray:
    return np.einsum("ij...,ij...->...", g.inverse_array, t)


def norm_sq2(t: np.ndarray, g: Metric) -> np.ndarray:
    """|T|² for a (0,2) tensor."""
    gi = g.inverse_array
    return np.einsum("ia...,jb...,ij...,ab...->...", gi, gi, t, t)


def conformal_scalar_curvature(omega: np.ndarray, grid) -> np.ndarray:
    """Scalar curvature of e^{2ω}δ from partial derivatives only.

    scal = e^{−2ω}(2(n−1)Δω − (n−1)(n−2)|dω|²) with Δ = −Σ∂_a².
    """
    n = grid.dim
    dw = gradient(omega, grid)
    lap = -sum(diff(dw[a], a, grid) for a in range(n))
    return np.exp(-2.0 * omega) * (2 * (n - 1) * lap - (n - 1) * (n - 2) * np.sum(dw * dw, axis=0))
