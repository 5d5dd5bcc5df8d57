"""First variations of the tension, the Hessian and P⁴, with finite-difference checks and Newton solves.

P²(φ, g) is the tension δ^g Tφ and P⁴(φ, g) = δdδTφ + δ((⅔scal − 2Ric)Tφ) − Se(δTφ).
Variations in φ act on sections along φ; variations in g take a symmetric
(0,2) field ġ. Sphere-valued central differences are projected onto T_φ, which
is the covariant derivative along the family to O(t²).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .bundle_maps import (
    MapField,
    ROUND_SPHERE,
    _tangent_array,
    bundle_codifferential,
    project_tangent,
    pullback_gradient,
    rough_laplacian,
    se_array,
    target_curvature,
)
from .curvature import (
    CO,
    CONTRA,
    codifferential,
    covariant_derivative_array,
    divergence_array,
    divergence_raised,
    laplacian_array,
    ricci_array,
    riemann_contract,
    scalar_curv_array,
)
from .geometry import (
    Metric,
    apply_fourier_multiplier,
    gradient,
    integrate,
    metric_from_array,
    grid_laplacian_symbol,
)
from .operators import el4_array


# ---------------------------------------------------------------------------
# variations of the tension and of ∇Tφ

def d_tension_dphi(phi: MapField, g: Metric, v: np.ndarray) -> np.ndarray:
    """(δd − Se)(φ̇)."""
    if phi.target.kind == ROUND_SPHERE:
        v = project_tangent(phi.periodic, v)
    return rough_laplacian(phi, v, g) - se_array(phi, v, g)


def _raise_first(gdot: np.ndarray, g: Metric) -> np.ndarray:
    """ġ_a^c as [a, c]."""
    return np.einsum("ab...,bc...->ac...", gdot, g.inverse_array)


def d_tension_dg(phi: MapField, g: Metric, gdot: np.ndarray) -> np.ndarray:
    """−δ(ġ(Tφ)) − ½⟨d tr ġ, Tφ⟩ with ġ(Tφ)_a = ġ_a^c Tφ_c."""
    t, _ = _tangent_array(phi)
    gt = np.einsum("ac...,cm...->am...", _raise_first(gdot, g), t)
    tr = np.einsum("ab...,ab...->...", g.inverse_array, gdot)
    dtr = np.einsum("ab...,a...->b...", g.inverse_array, gradient(tr, g.grid))
    return -bundle_codifferential(phi, gt, g) - 0.5 * np.einsum("b...,bm...->m...", dtr, t)


def hessian_array(phi: MapField, g: Metric) -> np.ndarray:
    """∇Tφ as [a, b, m]."""
    t, _ = _tangent_array(phi)
    return pullback_gradient(phi, t, g, dphi=t)


def d_nablaT_dphi(phi: MapField, g: Metric, v: np.ndarray) -> np.ndarray:
    """∇dφ̇ + R^h_{φ̇, Tφ(∂_a)} Tφ(∂_b) as [a, b, m]."""
    t, _ = _tangent_array(phi)
    if phi.target.kind == ROUND_SPHERE:
        v = project_tangent(phi.periodic, v)
    dv = pullback_gradient(phi, v, dphi=t)
    out = pullback_gradient(phi, dv, g, dphi=t)
    if phi.target.kind == ROUND_SPHERE:
        # the ambient derivative of a tangent one-form section leaves a normal part
        out = project_tangent(phi.periodic, out)
        # R^h_{φ̇, Tφ_a} Tφ_b = ⟨Tφ_a, Tφ_b⟩ φ̇ − ⟨φ̇, Tφ_b⟩ Tφ_a
        tt = np.einsum("am...,bm...->ab...", t, t)
        vt = np.einsum("m...,bm...->b...", v, t)
        out = out + tt[:, :, None] * v[None, None] - vt[None, :, None] * t[:, None]
    return out


def d_nablaT_dg(phi: MapField, g: Metric, gdot: np.ndarray) -> np.ndarray:
    """−⟨Tφ, δ*ġ − ½∇ġ⟩, contracting the last slot: −g^{cd}(δ*ġ(a,b,d) − ½∇_dġ_ab) Tφ_c."""
    t, _ = _tangent_array(phi)
    nab = covariant_derivative_array(gdot, (CO, CO), g)  # nab[d, a, b] = ∇_d ġ_ab
    full = 0.5 * (nab + nab.swapaxes(0, 1)) - 0.5 * np.moveaxis(nab, 0, 2)  # [a, b, d]
    up = np.einsum("abd...,dc...->abc...", full, g.inverse_array)
    return -np.einsum("abc...,cm...->abm...", up, t)


# ---------------------------------------------------------------------------
# variations of P⁴ at (id, h, h)

def _rough_laplacian_form(alpha: np.ndarray, h: Metric) -> np.ndarray:
    """∇*∇ on 1-forms."""
    nab = np.einsum("ab...,bj...->aj...", h.inverse_array, covariant_derivative_array(alpha, (CO,), h))
    return -divergence_raised(nab, (CO,), h)


def _ric_endo(alpha: np.ndarray, h: Metric) -> np.ndarray:
    """Ric acting on a 1-form: Ric_j^a α_a."""
    return np.einsum("jb...,ba...,a...->j...", ricci_array(h), h.inverse_array, alpha)


def _lower(v: np.ndarray, h: Metric) -> np.ndarray:
    return np.einsum("ab...,b...->a...", h.g, v)


def _raise(a: np.ndarray, h: Metric) -> np.ndarray:
    return np.einsum("ab...,b...->a...", h.inverse_array, a)


def d_P4_dphi(h: Metric, v: np.ndarray) -> np.ndarray:
    """(δd + ⅔scal − Ric)(δd − Ric)φ̇ + 2⟨Ric, ∇dφ̇ + R_{φ̇,·}·⟩ at (id, h, h), scal constant.

    φ̇ is a vector field; the result is returned as a vector field.
    """
    a = _lower(v, h)
    scal = scalar_curv_array(h)
    inner = _rough_laplacian_form(a, h) - _ric_endo(a, h)
    outer = _rough_laplacian_form(inner, h) + (2.0 / 3.0) * scal * inner - _ric_endo(inner, h)
    gi = h.inverse_array
    ric = ricci_array(h)
    ric_up = np.einsum("ia...,jb...,ab...->ij...", gi, gi, ric)
    nn = covariant_derivative_array(covariant_derivative_array(a, (CO,), h), (CO, CO), h)  # [a, b, l] = ∇_a∇_b α_l
    hess = np.einsum("ab...,abl...->l...", ric_up, nn)
    ric_mixed = np.einsum("ab...,bm...->am...", ric_up, h.g)
    rc = riemann_contract(h, ric_mixed)  # rc[l, i] = R_{b l i a} Ric^{ab} = R_{i a b l} Ric^{ab}
    curv = np.einsum("li...,i...->l...", rc, v)
    return _raise(outer + 2.0 * (hess + curv), h)


def d_P4_dg(h: Metric, gdot: np.ndarray) -> np.ndarray:
    """First variation of P⁴(id, g, h) in g at g = h, scal^h constant, as a vector field.

    −(δd + ⅔scal − Ric)(δġ + ½ d tr ġ) + ⅓(dΔ tr ġ + dδδġ) − ⅓ d⟨Ric, ġ⟩ − ⟨Ric, 2δ*ġ − ∇ġ⟩.
    """
    gi = h.inverse_array
    grid = h.grid
    scal = scalar_curv_array(h)
    ric = ricci_array(h)
    tr = np.einsum("ab...,ab...->...", gi, gdot)
    div = divergence_array(gdot, (CO, CO), h)  # (δġ)_b
    A = div + 0.5 * gradient(tr, grid)
    t1 = -(_rough_laplacian_form(A, h) + (2.0 / 3.0) * scal * A - _ric_endo(A, h))
    t2 = gradient(laplacian_array(tr, h) + codifferential(div, h), grid) / 3.0
    ric_g = np.einsum("ia...,jb...,ij...,ab...->...", gi, gi, ric, gdot)
    t3 = -gradient(ric_g, grid) / 3.0
    ric_up = np.einsum("ia...,jb...,ab...->ij...", gi, gi, ric)
    nab = covariant_derivative_array(gdot, (CO, CO), h)  # nab[d, a, b]
    t4 = -np.einsum("ab...,abd...->d...", ric_up, nab + nab.swapaxes(0, 1) - np.moveaxis(nab, 0, 2))
    return _raise(t1 + t2 + t3 + t4, h)


# ---------------------------------------------------------------------------
# central-difference validation

@dataclass
class FDReport:
    ts: np.ndarray
    errors: np.ndarray
    scale: float
    order: float
    exact: bool

    def to_dict(self) -> dict:
        return {"t": self.ts.tolist(), "error": self.errors.tolist(), "scale": self.scale,
                "order": self.order, "exact": self.exact}


def central_difference(parent: Callable[[float], np.ndarray], t: float,
                       project: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    d = (parent(t) - parent(-t)) / (2.0 * t)
    return d if project is None else project(d)


def fd_order(parent: Callable[[float], np.ndarray], linear: np.ndarray, ts: Sequence[float] | None = None,
             project=None, exact_tol: float = 1e-10) -> FDReport:
    """Error of the central difference against ``linear`` over a t-sweep, with its log-log slope.

    A parent that is affine in t has no O(t²) term; its errors sit at roundoff
    and the report is flagged ``exact`` instead of carrying a meaningful slope.
    """
    ts = np.logspace(-1, -3, 7) if ts is None else np.asarray(ts, float)
    scale = float(np.sqrt(np.mean(linear**2))) or 1.0
    errs = np.array([np.sqrt(np.mean((central_difference(parent, t, project) - linear) ** 2)) / scale for t in ts])
    if np.max(errs) <= exact_tol:
        return FDReport(ts, errs, scale, float("nan"), True)
    slope = float(np.polyfit(np.log(ts), np.log(errs), 1)[0])
    return FDReport(ts, errs, scale, slope, False)


def fd_parents(phi: MapField, g: Metric, v: np.ndarray | None = None, gdot: np.ndarray | None = None) -> dict:
    """Nonlinear parents t ↦ P(φ_t, g) or P(φ, g + tġ) for the central-difference suite."""
    out = {}
    if v is not None:
        out["tension_phi"] = lambda t: bundle_codifferential(phi.perturb(v, t), _tangent_array(phi.perturb(v, t))[0], g)
        out["nablaT_phi"] = lambda t: hessian_array(phi.perturb(v, t), g)
    if gdot is not None:
        out["tension_g"] = lambda t: bundle_codifferential(phi, _tangent_array(phi)[0], metric_from_array(g.grid, g.g + t * gdot))
        out["nablaT_g"] = lambda t: hessian_array(phi, metric_from_array(g.grid, g.g + t * gdot))
    return out


def p4_identity_parent_phi(phi_id: MapField, h: Metric, v: np.ndarray):
    """t ↦ P⁴(id + tφ̇, h) for a flat target."""
    return lambda t: el4_array(phi_id.perturb(v, t), h)


def p4_identity_parent_g(phi_id: MapField, h: Metric, gdot: np.ndarray):
    """t ↦ P⁴(id, h + tġ) for a flat target."""
    return lambda t: el4_array(phi_id, metric_from_array(h.grid, h.g + t * gdot))


# ---------------------------------------------------------------------------
# Newton solve of P⁴(φ, g) = 0

@dataclass
class NewtonReport:
    phi: MapField
    converged: bool
    residuals: list
    cg_iterations: list
    message: str = ""
    hypothesis: str = ""

    def history_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["iter", "residual", "cg_iterations"])
        for k, r in enumerate(self.residuals):
            w.writerow([k, repr(r), self.cg_iterations[k - 1] if k else 0])
        return buf.getvalue()

    def tail_ratio(self) -> float:
        if len(self.residuals) < 2 or self.residuals[-2] == 0:
            return 0.0
        return self.residuals[-1] / self.residuals[-2]


def p4_residual(phi: MapField, g: Metric) -> float:
    """‖P⁴(φ, g)‖_{L²(g)}."""
    p = el4_array(phi, g)
    return math.sqrt(max(integrate(np.sum(p * p, axis=0), g), 0.0))


def _p4_linear(phi: MapField, g: Metric, fd_step: float = 1e-4):
    """Jacobian action of P⁴ at φ: exact for flat targets, central differences otherwise."""
    if phi.target.is_flat:
        winding = None if phi.winding is None else np.zeros_like(phi.winding)

        def apply(v):
            return el4_array(MapField(phi.target, phi.grid, v, winding), g)

        return apply

    def apply_fd(v):
        return project_tangent(phi.periodic,
                               (el4_array(phi.perturb(v, fd_step), g) - el4_array(phi.perturb(v, -fd_step), g)) / (2 * fd_step))

    return apply_fd


def newton_c_harmonic(phi0: MapField, g: Metric, max_iter: int = 10, tol: float = 1e-8,
                      cg_tol: float = 1e-11, cg_maxiter: int = 200, blowup: float = 1e3) -> NewtonReport:
    """Newton iteration for P⁴(φ, g) = 0 with CG inner solves.

    The linear systems are solved in L²(dvol_g), where the Jacobian is
    self-adjoint, preconditioned by the flat Δ² (the centre linearization for
    flat h). Constant target translations span the kernel and are projected
    out; with scal = 0 this sidesteps, rather than satisfies, the negative
    scalar curvature hypothesis of the local existence argument.
    """
    grid = g.grid
    m = phi0.target.ambient_dim
    shape = (m,) + grid.shape
    w = g.volume_density * grid.cell_volume
    sym = grid_laplacian_symbol(grid) ** 2
    inv_sym = np.where(sym > 0, 1.0 / np.where(sym > 0, sym, 1.0), 0.0)
    in_range = (sym > 0).astype(float)

    def demean(x):
        return x - x.reshape(m, -1).mean(axis=1).reshape((m,) + (1,) * grid.dim)

    def precond(r):
        r = r.reshape(shape)
        return demean(apply_fourier_multiplier(r, inv_sym, grid) / grid.cell_volume).ravel()

    phi = phi0
    residuals = [p4_residual(phi, g)]
    iters: list[int] = []
    hyp = "scal = 0: constant modes projected out" if phi0.target.is_flat else ""
    if residuals[0] <= tol:
        return NewtonReport(phi, True, residuals, iters, "initial guess satisfies tolerance", hyp)
    for _ in range(max_iter):
        jac = _p4_linear(phi, g)
        rhs = -el4_array(phi, g)

        def matvec(x):
            return (w * jac(demean(x.reshape(shape)))).ravel()

        op = LinearOperator((rhs.size, rhs.size), matvec=matvec, dtype=float)
        pre = LinearOperator((rhs.size, rhs.size), matvec=precond, dtype=float)
        # modes with all wavenumbers in {0, N/2} lie outside the range of the grid operator
        b = demean(apply_fourier_multiplier(w * rhs, in_range, grid))
        count = [0]

        def cb(_):
            count[0] += 1

        sol, _info = cg(op, b.ravel(), rtol=cg_tol, atol=0.0, maxiter=cg_maxiter, M=pre, callback=cb)
        step = demean(sol.reshape(shape))
        if phi.target.kind == ROUND_SPHERE:
            step = project_tangent(phi.periodic, step)
        phi = phi.perturb(step, 1.0)
        iters.append(count[0])
        residuals.append(p4_residual(phi, g))
        if not np.isfinite(residuals[-1]) or residuals[-1] > blowup * residuals[0]:
            return NewtonReport(phi, False, residuals, iters, "diverged", hyp)
        if residuals[-1] <= tol:
            return NewtonReport(phi, True, residuals, iters, "converged", hyp)
    return NewtonReport(phi, False, residuals, iters, "max_iter reached", hyp)


# ---------------------------------------------------------------------------
# conformal gauge: δ P²(ω, φ, g) = 0 with ∫ω = 0

def conformal_tension(phi: MapField, g: Metric, omega: np.ndarray) -> np.ndarray:
    """Tension of φ for e^{2ω}g: e^{−2ω}(δTφ − (n−2)⟨dω, Tφ⟩)."""
    t, _ = _tangent_array(phi)
    tau = bundle_codifferential(phi, t, g)
    dw = np.einsum("ab...,a...->b...", g.inverse_array, gradient(omega, g.grid))
    return np.exp(-2.0 * omega) * (tau - (g.dim - 2) * np.einsum("b...,bm...->m...", dw, t))


def gauge_residual(phi: MapField, g: Metric, omega: np.ndarray) -> np.ndarray:
    """δ_g of the conformal tension, read as a vector field through the flat target chart."""
    p = conformal_tension(phi, g, omega)
    if p.shape[0] != g.dim:
        raise ValueError("the gauge equation needs a self-map (target dimension = source dimension)")
    return codifferential(_lower(p, g), g)


@dataclass
class GaugeReport:
    omega: np.ndarray
    converged: bool
    residuals: list


def solve_conformal_gauge(phi: MapField, g: Metric, tol: float = 1e-10, max_iter: int = 100,
                          omega0: np.ndarray | None = None) -> GaugeReport:
    """Zero-mean ω with δP²(ω, φ, g) = 0 by chord iteration on the frozen Jacobian −2Δ_g."""
    omega = np.zeros(g.grid.shape) if omega0 is None else np.array(omega0, float)
    vol = integrate(np.ones(g.grid.shape), g)

    def zero_mean(f):
        return f - integrate(f, g) / vol

    omega = zero_mean(omega)
    grid = g.grid
    sym = grid_laplacian_symbol(grid)
    residuals = []
    for _ in range(max_iter + 1):
        r = gauge_residual(phi, g, omega)
        res = math.sqrt(max(integrate(r * r, g), 0.0))
        residuals.append(res)
        if res <= tol:
            return GaugeReport(omega, True, residuals)
        if not np.isfinite(res) or (len(residuals) > 5 and res > 10 * residuals[0]):
            break
        # −2Δ_g δω = −r, solved with CG on the g-weighted Laplacian
        delta = _solve_laplace(g, 0.5 * r, sym)
        omega = zero_mean(omega + delta)
    return GaugeReport(omega, False, residuals)


def _solve_laplace(g: Metric, rhs: np.ndarray, sym: np.ndarray) -> np.ndarray:
    """Zero-mean u with Δ_g u = rhs − mean, preconditioned by the flat Laplacian."""
    grid = g.grid
    w = g.volume_density * grid.cell_volume
    inv = np.where(sym > 0, 1.0 / np.where(sym > 0, sym, 1.0), 0.0)

    def mv(x):
        u = x.reshape(grid.shape)
        return (w * laplacian_array(u - u.mean(), g)).ravel()

    def pc(x):
        y = apply_fourier_multiplier(x.reshape(grid.shape), inv, grid) / grid.cell_volume
        return (y - y.mean()).ravel()

    b = apply_fourier_multiplier(w * rhs, (sym > 0).astype(float), grid)
    b = b - b.mean()
    n = b.size
    sol, _ = cg(LinearOperator((n, n), matvec=mv, dtype=float), b.ravel(), rtol=1e-11, atol=0.0,
                maxiter=500, M=LinearOperator((n, n), matvec=pc, dtype=float))
    u = sol.reshape(grid.shape)
    return u - u.mean()
