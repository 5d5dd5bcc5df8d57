"""Experiment registry: each entry runs one reproducible numerical study and returns checks.

An experiment receives its validated config and a seeded generator and
returns an ``Outcome``: named checks with tolerances, free-form metrics and
optional CSV tables. Defaults reproduce the acceptance scales.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from . import curvature as cv
from .bundle_maps import (
    MapField,
    euclidean_map,
    project_tangent,
    random_smooth_field,
    sphere_map,
    torus_map,
)
from .flow import run_flow
from .functionals import (
    PiPower,
    e4_functional,
    einstein_closed_form,
    flat_torus_space,
    homogeneous_e4,
    homogeneous_e6,
    homogeneous_e6_identity,
    homogeneous_energy_integral,
    homogeneous_identity,
    round_sphere,
    unit_sphere,
)
from .geometry import (
    ChartGrid,
    Metric,
    apply_fourier_multiplier,
    conformal_metric,
    flat_laplacian_symbol,
    integrate,
    make_flat_torus,
    metric_from_array,
)
from .jets import (
    eigenmode_jet,
    energy_density_jet,
    functional_from_jet,
    poincare_metric_jet,
    solve_phi_jet,
)
from .linearization import (
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
    solve_conformal_gauge,
)
from .operators import (
    a_n,
    c6_einstein_operator,
    c6_identity_residual,
    el4_array,
    gjms_einstein,
    gjms_einstein_symbol,
    h4_array,
    identity_h4,
    identity_h4_closed_form,
    one_form_l2_norm,
    paneitz4,
    paneitz_einstein_symbol,
    section_l2_norm,
    sphere_eigenvalue,
    vector_l2_norm,
)
from .renorm import (
    einstein_profile,
    extension_profile,
    fit_expansion,
    ladder_csv,
    odd_constant_demo,
    renormalized_functional,
    ruban_ladder,
)


@dataclass
class Check:
    name: str
    value: float
    tol: float
    relation: str = "le"  # le | ge | eq | in
    upper: float | None = None

    @property
    def passed(self) -> bool:
        v = self.value
        if v is None or (isinstance(v, float) and math.isnan(v)):
            return False
        if self.relation == "le":
            return v <= self.tol
        if self.relation == "ge":
            return v >= self.tol
        if self.relation == "eq":
            return v == self.tol
        if self.relation == "in":
            return self.tol <= v <= self.upper
        raise ValueError(self.relation)

    def to_dict(self) -> dict:
        d = {"name": self.name, "value": _jsonable(self.value), "tol": _jsonable(self.tol),
             "relation": self.relation, "passed": self.passed}
        if self.upper is not None:
            d["upper"] = self.upper
        return d


def _jsonable(v):
    if isinstance(v, (Fraction, PiPower)):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


@dataclass
class Outcome:
    checks: list[Check] = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # file name → CSV text

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name, value, tol, relation="le", upper=None):
        self.checks.append(Check(name, value, tol, relation, upper))


# ---------------------------------------------------------------------------
# config helpers

def _grid(cfg: dict, dim: int = 4, n: int = 16) -> tuple[ChartGrid, Metric]:
    gcfg = cfg.get("grid", {})
    dim = gcfg.get("dim", dim)
    sizes = gcfg.get("sizes", n)
    sizes = (sizes,) * dim if isinstance(sizes, int) else tuple(sizes)
    return make_flat_torus(dim, sizes, method=gcfg.get("method", "spectral"))


def _param(cfg: dict, key: str, default):
    return cfg.get("params", {}).get(key, default)


def _tol(cfg: dict, key: str, default: float) -> float:
    return float(cfg.get("tolerances", {}).get(key, default))


def _metric(cfg: dict, grid: ChartGrid, flat: Metric, rng) -> Metric:
    sub = cfg.get("metric", {"kind": "flat"})
    kind = sub.get("kind", "flat")
    if kind == "flat":
        return flat
    amp, modes = sub.get("amplitude", 0.1), sub.get("modes", 1)
    g = flat
    if kind == "generic":
        k = random_smooth_field(rng, grid, sub.get("anisotropy", 0.05), modes, lead=(grid.dim, grid.dim))
        g = metric_from_array(grid, flat.g + 0.5 * (k + k.swapaxes(0, 1)))
    if kind in ("conformal", "generic"):
        return conformal_metric(g, random_smooth_field(rng, grid, amp, modes))
    raise ValueError(f"metric kind {kind!r} needs a homogeneous experiment")


def _base_metric(cfg: dict, grid: ChartGrid, flat: Metric, rng, amp: float = 0.1) -> Metric:
    return _metric({"metric": cfg.get("metric", {"kind": "conformal", "amplitude": amp})}, grid, flat, rng)


def _map(cfg: dict, grid: ChartGrid, rng, default: str = "torus") -> MapField:
    sub = cfg.get("map", {"kind": default})
    kind = sub.get("kind", default)
    amp, modes = sub.get("amplitude", 0.3), sub.get("modes", 1)
    n = grid.dim
    if kind == "identity":
        return torus_map(grid, np.eye(n), np.zeros((n,) + grid.shape))
    if kind == "torus":
        return torus_map(grid, np.eye(n), random_smooth_field(rng, grid, amp, modes, lead=(n,)))
    if kind == "euclidean":
        return euclidean_map(grid, random_smooth_field(rng, grid, amp, modes, lead=(sub.get("components", 3),)))
    if kind == "scalar":
        return euclidean_map(grid, random_smooth_field(rng, grid, amp, modes, lead=(1,)))
    if kind == "sphere":
        return _sphere(grid, rng, amp, modes)
    raise ValueError(f"unknown map kind {kind!r}")


def _sphere(grid: ChartGrid, rng, amp: float = 0.3, modes: int = 1) -> MapField:
    x = random_smooth_field(rng, grid, amp, modes, lead=(3,))
    x[2] += 1.0
    return sphere_map(grid, x / np.sqrt(np.sum(x * x, axis=0)))


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = float(np.max(np.abs(b)))
    return float(np.max(np.abs(a - b))) / (scale if scale > 0 else 1.0)


def _max_rel(res: np.ndarray, scale: float) -> float:
    return float(np.max(np.abs(res))) / (scale if scale > 0 else 1.0)


# ---------------------------------------------------------------------------
# experiments

def curvature_suite(cfg: dict, rng) -> Outcome:
    """Riemann symmetries, Bianchi identities, tr Sc, Weyl and Bach on e^{2ω}δ."""
    grid, flat = _grid(cfg, 4, 16)
    out = Outcome()
    draws = _param(cfg, "draws", 3)
    sub = cfg.get("metric", {"kind": "conformal"})
    if sub.get("kind") not in ("flat", "conformal"):
        raise ValueError("curvature-suite takes a flat or conformal metric")
    amp = sub.get("amplitude", _param(cfg, "amplitude", 0.1))
    tol = _tol(cfg, "residual", 1e-6)
    worst: dict[str, float] = {}
    omegas = [np.zeros(grid.shape)] if sub["kind"] == "flat" else [
        random_smooth_field(rng, grid, amp, sub.get("modes", 1)) for _ in range(draws)]
    for om in omegas:
        g = conformal_metric(flat, om)
        R = cv.riemann_array(g)
        scale = float(np.max(np.abs(R))) or 1.0
        res = {
            "antisym_ij": R + R.swapaxes(0, 1),
            "antisym_kl": R + R.swapaxes(2, 3),
            "pair_sym": R - R.transpose((2, 3, 0, 1) + tuple(range(4, R.ndim))),
            "bianchi_1": R + R.transpose((1, 2, 0, 3) + tuple(range(4, R.ndim))) + R.transpose((2, 0, 1, 3) + tuple(range(4, R.ndim))),
        }
        vals = {k: _max_rel(v, scale) for k, v in res.items()}
        del R, res
        scal = cv.scalar_curv_array(g)
        ds = cv.gradient(scal, grid)
        ds_scale = float(np.max(np.abs(ds))) or 1.0
        vals["contracted_bianchi"] = _max_rel(cv.divergence_array(cv.ricci_array(g), (cv.CO, cv.CO), g) + 0.5 * ds, ds_scale)
        sscale = float(np.max(np.abs(scal))) or 1.0
        vals["scal_oracle"] = _max_rel(scal - cv.conformal_scalar_curvature(om, grid), sscale)
        vals["trace_schouten"] = _max_rel(cv.trace(cv.schouten_array(g), g) - scal / 6.0, sscale)
        vals["weyl_zero"] = _max_rel(cv.weyl_array(g), scale)
        B = cv.bach_array(g)
        vals["bach_zero"] = _max_rel(B, scale)
        for k, v in vals.items():
            worst[k] = max(worst.get(k, 0.0), v)
    for k, v in worst.items():
        out.check(k, v, tol)
    if _param(cfg, "generic_bach", True) and omegas and np.any(omegas[0]):
        # Bach covariance on a metric that is not conformally flat
        k = random_smooth_field(rng, grid, 0.05, 1, lead=(4, 4))
        base = metric_from_array(grid, flat.g + 0.5 * (k + k.swapaxes(0, 1)))
        om = omegas[0]
        Bb = cv.bach_array(base)
        Bc = cv.bach_array(conformal_metric(base, om))
        out.check("bach_covariance_generic", _rel(Bc, np.exp(-2 * om) * Bb), _tol(cfg, "bach_generic", 1e-3))
    out.metrics["draws"] = len(omegas)
    return out


def conformal_invariance_e4(cfg: dict, rng) -> Outcome:
    """Spread of 𝓔⁴ over random conformal factors, at two resolutions."""
    out = Outcome()
    draws = _param(cfg, "draws", 10)
    amp = _param(cfg, "amplitude", 0.1)
    n_hi = cfg.get("grid", {}).get("sizes", 16)
    n_lo = _param(cfg, "coarse", 12)
    seed_state = rng.bit_generator.state
    spreads = {}
    rows = ["grid,draw,E4"]
    for n in (n_lo, n_hi):
        rng.bit_generator.state = seed_state
        grid, flat = make_flat_torus(4, (n,) * 4)
        phi = _map(cfg, grid, rng, "torus")
        vals = []
        for k in range(draws):
            om = random_smooth_field(rng, grid, amp, _param(cfg, "omega_modes", 2))
            vals.append(e4_functional(phi, conformal_metric(flat, om)))
            rows.append(f"{n},{k},{vals[-1]!r}")
        vals = np.array(vals)
        spreads[n] = float((vals.max() - vals.min()) / abs(vals.mean()))
    out.metrics["spreads"] = {str(k): v for k, v in spreads.items()}
    out.check("spread", spreads[n_hi], _tol(cfg, "spread", 1e-6))
    out.check("spread_not_increasing", spreads[n_hi] - max(spreads[n_lo], 1e-13), 0.0)
    out.tables["e4_values.csv"] = "\n".join(rows) + "\n"
    return out


def paneitz_covariance(cfg: dict, rng) -> Outcome:
    """h4 on scalar maps equals a₄·Paneitz, and Paneitz obeys the e^{−4ω} law."""
    grid, flat = _grid(cfg, 4, 16)
    out = Outcome()
    g = _base_metric(cfg, grid, flat, rng)
    f = random_smooth_field(rng, grid, 0.5, 2)
    phi = euclidean_map(grid, f[None])
    p = paneitz4(f, g)
    out.check("h4_equals_paneitz", _rel(h4_array(phi, g)[0] / float(a_n(4)), p), _tol(cfg, "h4", 1e-8))
    om = random_smooth_field(rng, grid, 0.1, 1)
    out.check("paneitz_covariance", _rel(paneitz4(f, conformal_metric(g, om)), np.exp(-4 * om) * p), _tol(cfg, "covariance", 1e-5))
    return out


def gjms_einstein_check(cfg: dict, rng) -> Outcome:
    """Flat reduction, constant annihilation and the sign reconciliation against Paneitz."""
    grid, flat = _grid(cfg, 4, 12)
    out = Outcome()
    f = random_smooth_field(rng, grid, 1.0, 2)
    lap2 = apply_fourier_multiplier(f, flat_laplacian_symbol(grid) ** 2, grid)
    out.check("flat_reduction", _rel(gjms_einstein(f, flat, 4, 0.0), lap2), _tol(cfg, "flat", 1e-10))
    out.check("constant_annihilation_flat", float(np.max(np.abs(gjms_einstein(np.ones(grid.shape), flat, 4, 0.0)))), 1e-12)
    worst = Fraction(0)
    for n in (2, 4, 6, 8):
        for scal in (Fraction(n * (n - 1)), Fraction(-3), Fraction(5, 7)):
            worst = max(worst, abs(gjms_einstein_symbol(Fraction(0), n, scal)))
    out.check("constant_annihilation_einstein", worst, Fraction(0), "eq")
    scal4 = Fraction(12)
    agree = {c: all(gjms_einstein_symbol(Fraction(sphere_eigenvalue(4, k)), 4, scal4, c)
                    == paneitz_einstein_symbol(Fraction(sphere_eigenvalue(4, k)), scal4) for k in range(8))
             for c in ("covariant", "literal")}
    branson = all(gjms_einstein_symbol(Fraction(sphere_eigenvalue(4, k)), 4, scal4) == k * (k + 1) * (k + 2) * (k + 3)
                  for k in range(8))
    out.metrics["sign_reconciliation"] = {
        "covariant_matches_paneitz": agree["covariant"],
        "literal_matches_paneitz": agree["literal"],
        "covariant_matches_branson_s4": branson,
        "adopted": "covariant",
    }
    out.check("covariant_matches_paneitz", float(agree["covariant"]), 1.0, "eq")
    out.check("branson_spectrum_s4", float(branson), 1.0, "eq")
    return out


def gradient_identity(cfg: dict, rng) -> Outcome:
    """Fourth-order central difference of 𝓔⁴ along φ̇ against (1/a₄)∫⟨φ̇, H⟩ for flat and sphere targets."""
    grid, flat = _grid(cfg, 4, 12)
    out = Outcome()
    g = _base_metric(cfg, grid, flat, rng)
    draws = _param(cfg, "draws", 5)
    t = _param(cfg, "t", 1e-3)
    for label, phi in (("flat", _map({"map": {"kind": "torus"}}, grid, rng)), ("sphere", _sphere(grid, rng, 0.2))):
        h = h4_array(phi, g)
        worst = 0.0
        for _ in range(draws):
            v = random_smooth_field(rng, grid, 0.3, 1, lead=(phi.periodic.shape[0],))
            if label == "sphere":
                v = project_tangent(phi.periodic, v)
            e = {s: e4_functional(phi.perturb(v, s * t), g) for s in (-2, -1, 1, 2)}
            fd = (e[-2] - 8 * e[-1] + 8 * e[1] - e[2]) / (12 * t)  # fourth-order central difference
            an = integrate(np.sum(v * h, axis=0), g) / float(a_n(4))
            worst = max(worst, abs(fd - an) / max(abs(an), 1e-300))
        out.check(f"gradient_identity_{label}", worst, _tol(cfg, "relative", 1e-4))
    return out


def einstein_closed_form_exp(cfg: dict, rng) -> Outcome:
    """Exact energies of harmonic maps from Einstein space forms."""
    out = Outcome()
    s4 = unit_sphere(4)
    e = homogeneous_e4(s4, homogeneous_identity(s4))
    out.metrics["E4_id_S4"] = str(e)
    out.check("e4_identity_unit_s4", e, PiPower(Fraction(32, 3), 2), "eq")
    cf = einstein_closed_form(4, s4.lam, homogeneous_energy_integral(s4, homogeneous_identity(s4)))
    out.check("e4_equals_closed_form_s4", e, cf, "eq")
    for r in (Fraction(2), Fraction(1, 3)):
        sp = round_sphere(4, r)
        idm = homogeneous_identity(sp)
        out.check(f"e4_closed_form_s4_r{r}", homogeneous_e4(sp, idm),
                  einstein_closed_form(4, sp.lam, homogeneous_energy_integral(sp, idm)), "eq")
    s6 = unit_sphere(6)
    idm6 = homogeneous_identity(s6)
    e6 = homogeneous_e6(s6, idm6)
    out.metrics["E6_id_S6"] = str(e6)
    out.check("e6_equals_closed_form_s6", e6, einstein_closed_form(6, s6.lam, homogeneous_energy_integral(s6, idm6)), "eq")
    out.check("e6_identity_energy_s6", e6, homogeneous_e6_identity(s6), "eq")
    t4 = flat_torus_space(4)
    out.check("e4_flat_torus_zero", homogeneous_e4(t4, homogeneous_identity(t4)), PiPower(Fraction(0), 4), "eq")
    return out


def jet_oracle_h4(cfg: dict, rng) -> Outcome:
    """Jet log coefficients against the closed-form operators, plus parity and Einstein checks."""
    grid, flat = _grid(cfg, 4, 12)
    out = Outcome()
    g = _base_metric(cfg, grid, flat, rng)
    phi = _map(cfg, grid, rng, "torus")
    pj = solve_phi_jet(phi, g)
    out.check("grid_H_vs_h4", _rel(pj.H, h4_array(phi, g)), _tol(cfg, "grid", 1e-8))
    odd = max(float(np.max(np.abs(pj.jet.coeff(k)))) for k in (1, 3))
    out.check("odd_coefficients_grid", odd, 0.0, "eq")
    lam, worst4, worst6 = Fraction(1, 4), Fraction(0), Fraction(0)
    for k in range(6):
        mu4 = Fraction(sphere_eigenvalue(4, k))
        worst4 = max(worst4, abs(eigenmode_jet(4, lam, mu4).H - a_n(4) * mu4 * (mu4 + 8 * lam)))
        mu6 = Fraction(sphere_eigenvalue(6, k))
        worst6 = max(worst6, abs(384 * eigenmode_jet(6, lam, mu6).H - mu6 * (mu6 + 16 * lam) * (mu6 + 24 * lam)))
    out.check("eigenmode_H4_exact", worst4, Fraction(0), "eq")
    out.check("eigenmode_H6_exact", worst6, Fraction(0), "eq")
    odd_exact = all(all(r.u[j] == 0 for j in range(1, n, 2)) for n in (3, 4, 5, 6, 7)
                    for r in [eigenmode_jet(n, lam, Fraction(sphere_eigenvalue(n, 2)))])
    out.check("odd_coefficients_exact", float(odd_exact), 1.0, "eq")
    no_log_odd = all(not eigenmode_jet(n, lam, Fraction(sphere_eigenvalue(n, 1))).log_present for n in (3, 5, 7))
    out.check("odd_dimension_no_log", float(no_log_odd), 1.0, "eq")
    harm = [eigenmode_jet(n, lam, 0) for n in (4, 6)]
    zero_jet = all(all(c == 0 for c in r.u[1:-1]) and r.H == 0 for r in harm)
    out.check("einstein_harmonic_zero_jet", float(zero_jet), 1.0, "eq")
    ident = torus_map(grid, np.eye(4), np.zeros((4,) + grid.shape))
    pj0 = solve_phi_jet(ident, flat)
    out.check("flat_identity_zero_H", float(np.max(np.abs(pj0.H))), _tol(cfg, "zero", 1e-12))
    return out


def ruban_fit(cfg: dict, rng) -> Outcome:
    """Synthetic round trip, Einstein magnitude, conformal invariance of F and the negative control."""
    out = Outcome()
    rhos = 0.5 * 2.0 ** -np.arange(1, 13)
    planted = 3 * rhos**-2 + 5 * np.log(1 / rhos) + 7
    fit = fit_expansion(rhos, planted, 4)
    err = max(abs(fit.divergent[-2] - 3), abs(fit.F - 5), abs(fit.const - 7))
    out.check("synthetic_roundtrip", err, _tol(cfg, "synthetic", 1e-8))
    lam, energy = 0.25, 10.0
    r, e = ruban_ladder(einstein_profile(lam, energy, 4), 4)
    fe = fit_expansion(r, e, 4)
    out.check("einstein_F_magnitude", abs(abs(fe.F) - lam * energy) / (lam * energy), _tol(cfg, "einstein", 1e-4))
    out.metrics["einstein_F_sign"] = "negative" if fe.F < 0 else "positive"
    out.check("einstein_renormalized_matches_closed_form",
              abs(renormalized_functional(fe.F, 4) - einstein_closed_form(4, lam, energy)) / einstein_closed_form(4, lam, energy),
              _tol(cfg, "closed_form", 1e-3))
    grid, flat = _grid(cfg, 4, 12)
    phi = _map(cfg, grid, rng, "torus")
    base = conformal_metric(flat, random_smooth_field(rng, grid, 0.1, 1))
    reps = [base] + [conformal_metric(base, random_smooth_field(rng, grid, 0.1, 1)) for _ in range(2)]
    Fs, Es = [], []
    for k, g in enumerate(reps):
        pj = solve_phi_jet(phi, g)
        mj = poincare_metric_jet(g)
        rr, ee = ruban_ladder(extension_profile(pj, mj), 4)
        f = fit_expansion(rr, ee, 4)
        Fs.append(f.F)
        Es.append(f.divergent[-2])
        if k == 0:
            out.tables["ruban_ladder.csv"] = ladder_csv(rr, ee)
            out.metrics["fit"] = f.to_dict()
    Fs, Es = np.array(Fs), np.array(Es)
    out.metrics["F"] = Fs.tolist()
    out.metrics["E_minus2"] = Es.tolist()
    out.check("F_invariance", float((Fs.max() - Fs.min()) / abs(Fs.mean())), _tol(cfg, "invariance", 1e-4))
    out.check("divergent_not_invariant", float((Es.max() - Es.min()) / abs(Es.mean())), _tol(cfg, "negative_control", 1e-3), "ge")
    return out


def triple_oracle(cfg: dict, rng) -> Outcome:
    """e4_functional, functional_from_jet and the renormalized fit agree on a generic conformally flat metric."""
    grid, flat = _grid(cfg, 4, 12)
    out = Outcome()
    g = _base_metric(cfg, grid, flat, rng)
    phi = _map(cfg, grid, rng, "torus")
    e4 = e4_functional(phi, g)
    pj = solve_phi_jet(phi, g)
    mj = poincare_metric_jet(g)
    jet_val = functional_from_jet(energy_density_jet(pj, mj), 4, g)
    rr, ee = ruban_ladder(extension_profile(pj, mj), 4)
    ren = renormalized_functional(fit_expansion(rr, ee, 4).F, 4)
    out.metrics.update({"e4_functional": e4, "functional_from_jet": jet_val, "renormalized_fit": ren,
                        "sign_convention": "consistent: +(n a_n)^-1 F"})
    out.check("jet_vs_e4", abs(jet_val - e4) / abs(e4), _tol(cfg, "relative", 1e-3))
    out.check("fit_vs_e4", abs(ren - e4) / abs(e4), _tol(cfg, "relative", 1e-3))
    s4 = unit_sphere(4)
    out.check("exact_e4_identity_unit_s4", homogeneous_e4(s4, homogeneous_identity(s4)), PiPower(Fraction(32, 3), 2), "eq")
    return out


def h_covariance(cfg: dict, rng) -> Outcome:
    """‖H^{e^{2ω}g} − e^{−4ω}H^g‖ / ‖H^g‖ for several conformal factors."""
    grid, flat = _grid(cfg, 4, 16)
    out = Outcome()
    g = _base_metric(cfg, grid, flat, rng)
    phi = _map(cfg, grid, rng, "torus")
    h = h4_array(phi, g)
    nh = section_l2_norm(h, g)
    worst = 0.0
    for _ in range(_param(cfg, "draws", 3)):
        om = random_smooth_field(rng, grid, 0.1, 1)
        hb = h4_array(phi, conformal_metric(g, om))
        worst = max(worst, section_l2_norm(hb - np.exp(-4 * om) * h, g) / nh)
    out.check("H_covariance", worst, _tol(cfg, "relative", 1e-4))
    return out


def identity_check(cfg: dict, rng) -> Outcome:
    """H of the identity: zero for constant scal, nonzero for a generic conformal metric."""
    grid, flat = _grid(cfg, 4, 16)
    out = Outcome()
    out.check("identity_flat", vector_l2_norm(identity_h4(flat), flat), _tol(cfg, "zero", 1e-10))
    s4 = unit_sphere(4)
    # −∇scal/48 with constant scal
    out.check("identity_homogeneous", Fraction(0) * s4.scal, Fraction(0), "eq")
    g = conformal_metric(flat, random_smooth_field(rng, grid, _param(cfg, "amplitude", 0.2), 1))
    h = identity_h4(g)
    norm = vector_l2_norm(h, g) / math.sqrt(integrate(np.ones(grid.shape), g))
    out.metrics["generic_rms_H"] = norm
    out.check("identity_generic_nonzero", norm, _tol(cfg, "nonzero", 1e-3), "ge")
    out.check("identity_closed_form", _rel(h, identity_h4_closed_form(g)), _tol(cfg, "closed_form", 1e-6))
    return out


def dim6_einstein_op(cfg: dict, rng) -> Outcome:
    """Flat-T⁶ reduction of the six-dimensional operator and the exact Einstein energy."""
    grid, flat = _grid(cfg, 6, 8)
    out = Outcome()
    f = random_smooth_field(rng, grid, 0.3, 1, lead=(2,))
    phi = euclidean_map(grid, f)
    ref = apply_fourier_multiplier(f, flat_laplacian_symbol(grid) ** 3, grid)
    out.check("flat_t6_reduction", _rel(c6_einstein_operator(phi, flat, 0.0), ref), _tol(cfg, "fourier", 1e-6))
    s6 = unit_sphere(6)
    idm = homogeneous_identity(s6)
    out.check("e6_closed_form_exact", homogeneous_e6(s6, idm),
              einstein_closed_form(6, s6.lam, homogeneous_energy_integral(s6, idm)), "eq")
    return out


def dim6_identity(cfg: dict, rng) -> Outcome:
    """The six-dimensional identity condition vanishes on constant curvature and not on a conformal perturbation."""
    grid, flat = _grid(cfg, 6, 8)
    out = Outcome()
    out.check("c6_identity_flat", one_form_l2_norm(c6_identity_residual(flat), flat), _tol(cfg, "zero", 1e-10))
    out.check("c6_identity_homogeneous", unit_sphere(6).identity_c6_residual(), Fraction(0), "eq")
    if _param(cfg, "generic", True):
        om = random_smooth_field(rng, grid, 0.02, 1)
        g = conformal_metric(flat, om)
        r = one_form_l2_norm(c6_identity_residual(g), g)
        out.metrics["generic_residual"] = r
        out.check("c6_identity_generic_nonzero", r, 1e-6, "ge")
        # continuity as ω → 0: the residual is linear in ω to leading order
        gh = conformal_metric(flat, 0.5 * om)
        ratio = r / one_form_l2_norm(c6_identity_residual(gh), gh)
        out.metrics["halving_ratio"] = ratio
        out.check("c6_identity_linear_decay", ratio, 1.9, "in", 2.1)
    return out


def newton_local(cfg: dict, rng) -> Outcome:
    """Newton solve of P⁴(φ, g) = 0 near the identity for g = e^{2ω}h and a generic g."""
    grid, h = _grid(cfg, 4, 12)
    out = Outcome()
    ident = torus_map(grid, np.eye(4), np.zeros((4,) + grid.shape))
    tol = _tol(cfg, "residual", 1e-8)
    r0 = newton_c_harmonic(ident, h, tol=tol)
    out.check("flat_zero_iterations", float(len(r0.residuals) - 1), 0.0, "eq")
    om = random_smooth_field(rng, grid, _param(cfg, "amplitude", 0.05), 1)
    g = conformal_metric(h, om)
    r1 = newton_c_harmonic(ident, g, tol=tol)
    out.check("conformal_residual", r1.residuals[-1], tol)
    out.metrics["conformal_history"] = r1.residuals
    k = random_smooth_field(rng, grid, 0.05, 1, lead=(4, 4))
    g2 = conformal_metric(metric_from_array(grid, h.g + 0.5 * (k + k.swapaxes(0, 1))), om)
    r2 = newton_c_harmonic(ident, g2, tol=tol)
    out.check("generic_residual", r2.residuals[-1], tol)
    out.check("generic_tail_ratio", r2.tail_ratio(), _tol(cfg, "tail_ratio", 0.1))
    out.metrics["generic_history"] = r2.residuals
    out.metrics["hypothesis"] = r2.hypothesis
    out.tables["newton_history.csv"] = r2.history_csv()
    return out


def conformal_gauge(cfg: dict, rng) -> Outcome:
    """Zero-mean conformal factor solving the weak harmonicity condition for the Newton solution."""
    grid, h = _grid(cfg, 4, 12)
    out = Outcome()
    ident = torus_map(grid, np.eye(4), np.zeros((4,) + grid.shape))
    om = random_smooth_field(rng, grid, 0.05, 1)
    k = random_smooth_field(rng, grid, 0.05, 1, lead=(4, 4))
    g = conformal_metric(metric_from_array(grid, h.g + 0.5 * (k + k.swapaxes(0, 1))), om)
    phi = newton_c_harmonic(ident, g).phi
    tol = _tol(cfg, "residual", 1e-10)
    rep = solve_conformal_gauge(phi, g, tol=tol)
    out.check("gauge_residual", rep.residuals[-1], tol)
    vol = integrate(np.ones(grid.shape), g)
    out.check("zero_mean", abs(integrate(rep.omega, g)) / vol, 1e-12)
    c = 0.3
    probe = random_smooth_field(rng, grid, 0.1, 1)
    out.check("constant_shift_scaling",
              _rel(gauge_residual(phi, g, probe + c), math.exp(-2 * c) * gauge_residual(phi, g, probe)), 1e-12)
    shifted = gauge_residual(phi, g, rep.omega + c)
    out.check("shifted_solution_residual", math.sqrt(integrate(shifted**2, g)), tol)
    flat_id = solve_conformal_gauge(ident, h, tol=tol)
    out.check("harmonic_gives_zero", float(np.max(np.abs(flat_id.omega))), 1e-12)
    out.metrics["history"] = rep.residuals
    return out


def flow_run(cfg: dict, rng) -> Outcome:
    """Armijo descent of 𝓔⁴ from a perturbed identity on flat T⁴."""
    grid, h = _grid(cfg, 4, 12)
    out = Outcome()
    phi0 = torus_map(grid, np.eye(4), random_smooth_field(rng, grid, _param(cfg, "amplitude", 0.2), 1, lead=(4,)))
    tol = _tol(cfg, "H", 1e-6)
    rep = run_flow(phi0, h, tol=tol, max_iter=_param(cfg, "max_iter", 200), precondition=_param(cfg, "precondition", True))
    out.check("H_norm", rep.h_norms[-1], tol)
    out.check("monotone_energy", float(rep.monotone()), 1.0, "eq")
    out.check("energy_not_above_initial", rep.energies[-1] - rep.energies[0], 0.0)
    om = random_smooth_field(rng, grid, 0.1, 1)
    hb = section_l2_norm(h4_array(rep.phi, conformal_metric(h, om)), h)
    bound = float(np.max(np.exp(-4 * om))) * rep.h_norms[-1]
    out.check("zero_set_covariance", hb / max(bound, 1e-300), 1.0 + _tol(cfg, "covariance", 1e-4))
    out.metrics["iterations"] = len(rep.steps)
    out.tables["flow_trajectory.csv"] = rep.trajectory_csv()
    return out


def variation_fd_suite(cfg: dict, rng) -> Outcome:
    """Central-difference order of every first-variation formula."""
    out = Outcome()
    lo, hi = _tol(cfg, "order_low", 1.9), _tol(cfg, "order_high", 2.1)
    n2 = _param(cfg, "sphere_grid", 128)
    grid2, flat2 = make_flat_torus(2, (n2, n2))
    g2 = conformal_metric(flat2, random_smooth_field(rng, grid2, 0.2, 2))
    sph = _sphere(grid2, rng, 0.5, 2)
    v = random_smooth_field(rng, grid2, 0.5, 2, lead=(3,))
    k = random_smooth_field(rng, grid2, 0.3, 2, lead=(2, 2))
    gd = 0.5 * (k + k.swapaxes(0, 1))
    P = fd_parents(sph, g2, v=v, gdot=gd)

    def proj(d):
        return project_tangent(sph.periodic, d)

    rows = ["formula,t,error"]
    cases = [
        ("d_tension_dphi", P["tension_phi"], d_tension_dphi(sph, g2, v), proj),
        ("d_nablaT_dphi", P["nablaT_phi"], d_nablaT_dphi(sph, g2, v), proj),
        ("d_tension_dg", P["tension_g"], d_tension_dg(sph, g2, gd), None),
        ("d_nablaT_dg", P["nablaT_g"], d_nablaT_dg(sph, g2, gd), None),
    ]
    grid4, h = _grid(cfg, 4, 12)
    ident = torus_map(grid4, np.eye(4), np.zeros((4,) + grid4.shape))
    k4 = random_smooth_field(rng, grid4, 0.2, 1, lead=(4, 4))
    gd4 = 0.5 * (k4 + k4.swapaxes(0, 1))
    cases.append(("d_P4_dg", p4_identity_parent_g(ident, h, gd4), d_P4_dg(h, gd4), None))
    for name, parent, lin, pr in cases:
        rep = fd_order(parent, lin, project=pr)
        rows += [f"{name},{t!r},{e!r}" for t, e in zip(rep.ts, rep.errors)]
        out.check(f"{name}_order", rep.order, lo, "in", hi)
    # affine parents: the central difference is exact, so only exactness is observable
    v4 = random_smooth_field(rng, grid4, 0.3, 1, lead=(4,))
    rep = fd_order(p4_identity_parent_phi(ident, h, v4), d_P4_dphi(h, v4))
    out.check("d_P4_dphi_exact_affine", float(np.max(rep.errors)), _tol(cfg, "affine", 1e-10))
    e = euclidean_map(grid2, random_smooth_field(rng, grid2, 0.5, 2, lead=(3,)))
    Pe = fd_parents(e, g2, v=v)
    rep = fd_order(Pe["tension_phi"], d_tension_dphi(e, g2, v))
    out.check("d_tension_dphi_flat_exact_affine", float(np.max(rep.errors)), _tol(cfg, "affine", 1e-10))
    rep = fd_order(Pe["nablaT_phi"], d_nablaT_dphi(e, g2, v))
    out.check("d_nablaT_dphi_flat_exact_affine", float(np.max(rep.errors)), _tol(cfg, "affine", 1e-10))
    out.tables["fd_sweep.csv"] = "\n".join(rows) + "\n"
    return out


def odd_constant_demo_exp(cfg: dict, rng) -> Outcome:
    """Odd-dimensional finite part on an explicit hyperbolic strip (demo)."""
    out = Outcome()
    d = odd_constant_demo(_param(cfg, "k", 1.0), 3, _param(cfg, "weight", 1.0), _param(cfg, "scale", 2.0))
    out.metrics.update(d)
    c0, c1 = d["g"]["C"], d["scaled"]["C"]
    out.check("C_closed_form", abs(c0 - d["C_closed_form"]) / abs(d["C_closed_form"]), _tol(cfg, "closed_form", 1e-6))
    out.check("C_invariance", abs(c1 - c0) / abs(c0), _tol(cfg, "invariance", 1e-6))
    out.check("no_log_term", abs(d["g"]["F"]) / abs(c0), _tol(cfg, "log", 1e-6))
    e0, e1 = d["g"]["E_div"][-1], d["scaled"]["E_div"][-1]
    out.check("divergent_not_invariant", abs(e1 - e0) / abs(e0), 1e-3, "ge")
    return out


EXPERIMENTS: dict[str, Callable[[dict, np.random.Generator], Outcome]] = {
    "curvature-suite": curvature_suite,
    "conformal-invariance-e4": conformal_invariance_e4,
    "paneitz-covariance": paneitz_covariance,
    "gjms-einstein-check": gjms_einstein_check,
    "gradient-identity": gradient_identity,
    "einstein-closed-form": einstein_closed_form_exp,
    "jet-oracle-h4": jet_oracle_h4,
    "ruban-fit": ruban_fit,
    "dim6-einstein-op": dim6_einstein_op,
    "dim6-identity": dim6_identity,
    "newton-local": newton_local,
    "conformal-gauge": conformal_gauge,
    "flow-run": flow_run,
    "variation-fd-suite": variation_fd_suite,
}

# studies used by the acceptance suite that are not separate CLI entries
EXTRA = {
    "triple-oracle": triple_oracle,
    "h-covariance": h_covariance,
    "identity-check": identity_check,
    "odd-constant-demo": odd_constant_demo_exp,
}
