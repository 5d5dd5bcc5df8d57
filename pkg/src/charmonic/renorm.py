"""Ruban energies of the formal harmonic extension and their divergent expansion.

With g_+ = r⁻²(dr² + g_r) on M × (0, ε) the ruban energy above ρ is

    E(ρ) = ½ ∫_M ∫_ρ^ε r^{1−n} e(r) dr dvol_g,
    e(r) = (|∂_rφ̃|² + g_r^{ab}⟨∂_aφ̃, ∂_bφ̃⟩) √(det g_r / det g),

and E(ρ) = E_{2−n}ρ^{2−n} + … + E_{−2}ρ^{−2} + F log(1/ρ) + O(1).
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma, kv

from .geometry import integrate
from .jets import MetricJet, PhiJet, matmul
from .operators import a_n


class IllConditioned(RuntimeError):
    pass


COND_LIMIT = 1e12
DEFAULT_EPS = 0.5
DEFAULT_RUNGS = 12
GL_NODES = 24


def _poly(raw: Sequence, r: float, log=0):
    """Σ c_k r^k over determined slots, undetermined slots read as zero."""
    out = None
    for k, c in enumerate(raw):
        if c is None:
            continue
        term = c * r**k
        out = term if out is None else out + term
    n = len(raw) - 1
    if log is not None and not (np.isscalar(log) and log == 0):
        out = out + log * (r**n * math.log(r))
    return out


def _dpoly(raw: Sequence, r: float):
    out = None
    for k, c in enumerate(raw):
        if c is None or k == 0:
            continue
        term = k * c * r ** (k - 1)
        out = term if out is None else out + term
    return out


def extension_profile(pj: PhiJet, mj: MetricJet) -> Callable[[float], float]:
    """r ↦ ∫_M e(r) dvol_g for the extension assembled from determined slots."""
    from .geometry import gradient

    g = mj.g
    grid = g.grid
    u_raw = pj.jet.raw
    du0 = pj.base.differential()
    grads = [du0] + [None if c is None else gradient(c, grid) for c in u_raw[1:]]
    g_raw = mj.metric.raw
    g_log = mj.metric._log if mj.metric.log_is_determined() else 0
    sqrt_det0 = g.volume_density

    def profile(r: float) -> float:
        gr = _poly(g_raw, r, g_log)
        gr_t = np.moveaxis(gr, (0, 1), (-2, -1))
        inv = np.moveaxis(np.linalg.inv(gr_t), (-2, -1), (0, 1))
        det = np.linalg.det(gr_t)
        ratio = np.sqrt(det) / sqrt_det0
        dphi = _poly(grads, r)
        dr = _dpoly(u_raw, r)
        radial = 0.0 if dr is None else np.sum(dr * dr, axis=0)
        tang = np.einsum("ab...,am...,bm...->...", inv, dphi, dphi)
        return integrate((radial + tang) * ratio, g)

    return profile


def einstein_profile(lam: float, energy_integral: float, n: int) -> Callable[[float], float]:
    """Harmonic φ over an Einstein metric: the constant extension has e(r) = (1−λr²)^{n−2}|Tφ|²."""

    def profile(r: float) -> float:
        return energy_integral * (1.0 - lam * r * r) ** (n - 2)

    return profile


def strip_mode_profile(k: float, n: int, weight: float = 1.0) -> Callable[[float], float]:
    """Hyperbolic strip r⁻²(dr² + g) over flat g, boundary mode of wavenumber k.

    The bounded harmonic extension is u(r) = (kr)^ν K_ν(kr) / (2^{ν−1}Γ(ν)), ν = n/2,
    so e(r) = weight·(u′² + k²u²) with weight = ∫ f² dvol for the boundary mode f.
    """
    nu = 0.5 * n
    norm = 2.0 ** (nu - 1) * gamma(nu)

    def profile(r: float) -> float:
        z = k * r
        u = z**nu * kv(nu, z) / norm
        du = -k * z**nu * kv(nu - 1, z) / norm
        return weight * (du * du + k * k * u * u)

    return profile


def strip_ladder(profile, n: int, eps: float = DEFAULT_EPS, rungs: int = DEFAULT_RUNGS, far: float = 80.0,
                 nodes: int = GL_NODES) -> tuple[np.ndarray, np.ndarray]:
    """E(ρ) = ½∫_ρ^∞ on the ladder ρ_j = ε 2^{−j}; the part above ε is integrated once up to ``far``."""
    rhos, values = ruban_ladder(profile, n, eps, rungs, nodes)
    return rhos, values + ruban_energy(profile, n, eps, far, nodes)


def odd_constant_demo(k: float = 1.0, n: int = 3, weight: float = 1.0, scale: float = 2.0) -> dict:
    """Finite part C of the strip energy for g and the dilated boundary metric scale²·g.

    Dilation is a conformal change: k → k/scale and weight → scale^n·weight. For n = 3
    the closed form is E(ρ) = ½ weight (k²/ρ − k³) + o(1), so C = −½ weight k³.
    Demo only: the boundary is flat and the extension is explicit. Restricted to
    n = 3: for n ≥ 5 the ρ^{2−n} term swamps the finite part in double precision
    on a ladder long enough to fit the tail.
    """
    if n != 3:
        raise ValueError("the strip demo is calibrated for n = 3")
    out = {"label": "demo", "n": n}
    for tag, kk, w in (("g", k, weight), ("scaled", k / scale, weight * scale**n)):
        rhos, vals = strip_ladder(strip_mode_profile(kk, n, w), n, rungs=16, far=80.0 / kk)
        fit = fit_expansion(rhos, vals, n, tail=4)
        out[tag] = {"C": fit.const, "E_div": fit.divergent, "F": fit.F, "cond": fit.cond}
    out["C_closed_form"] = -0.5 * weight * k**3
    return out


def _panel_integral(profile, n: int, lo: float, hi: float, nodes: int) -> float:
    """∫_lo^hi r^{1−n} profile(r) dr with Gauss–Legendre in s = log r."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    a, b = math.log(lo), math.log(hi)
    s = 0.5 * (b - a) * x + 0.5 * (b + a)
    r = np.exp(s)
    vals = np.array([profile(float(ri)) for ri in r])
    return 0.5 * (b - a) * float(np.sum(w * r ** (2 - n) * vals))


def ruban_energy(profile: Callable[[float], float], n: int, rho: float, eps: float = DEFAULT_EPS,
                 nodes: int = GL_NODES) -> float:
    """½ ∫_ρ^ε r^{1−n} profile(r) dr on dyadic panels."""
    if not 0 < rho < eps:
        raise ValueError("need 0 < rho < eps")
    total = 0.0
    hi = eps
    while hi > rho:
        lo = max(hi / 2.0, rho)
        total += _panel_integral(profile, n, lo, hi, nodes)
        hi = lo
    return 0.5 * total


def ruban_ladder(profile: Callable[[float], float], n: int, eps: float = DEFAULT_EPS,
                 rungs: int = DEFAULT_RUNGS, nodes: int = GL_NODES) -> tuple[np.ndarray, np.ndarray]:
    """E(ρ_j) at ρ_j = ε 2^{−j}, j = 1..rungs, sharing panels between rungs."""
    rhos = eps * 2.0 ** -np.arange(1, rungs + 1)
    values = np.empty(rungs)
    acc = 0.0
    hi = eps
    for j, rho in enumerate(rhos):
        acc += _panel_integral(profile, n, rho, hi, nodes)
        values[j] = 0.5 * acc
        hi = rho
    return rhos, values


@dataclass
class FitResult:
    n: int
    divergent: dict  # power → coefficient of ρ^{power}
    F: float
    const: float
    cond: float
    residual: float
    tail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "coeffs": {**{f"rho^{p}": c for p, c in self.divergent.items()}, "log(1/rho)": self.F, "1": self.const,
                       **{f"rho^{p}": c for p, c in self.tail.items()}},
            "cond": self.cond,
            "residual": self.residual,
        }


def fit_basis(rhos: np.ndarray, n: int, tail: int = 0) -> tuple[np.ndarray, list[int], list[int]]:
    step = 2 if n % 2 == 0 else 1
    powers = list(range(2 - n, 0, step))
    tails = [step * (k + 1) for k in range(tail)]
    cols = [rhos ** float(p) for p in powers] + [np.log(1.0 / rhos), np.ones_like(rhos)]
    cols += [rhos ** float(p) for p in tails]
    return np.stack(cols, axis=1), powers, tails


def fit_expansion(rhos: Sequence[float], values: Sequence[float], n: int, tail: int = 1) -> FitResult:
    """Least squares in {ρ^{2−n}, …, ρ^{−2}, log(1/ρ), 1}; refuses ill-conditioned designs.

    Odd powers are omitted for even n (they vanish by parity of the extension).
    ``tail`` adds that many vanishing powers ρ², ρ⁴, … of the O(1) remainder.
    The condition number is that of the column-equilibrated design.
    """
    rhos = np.asarray(rhos, float)
    values = np.asarray(values, float)
    A, powers, tails = fit_basis(rhos, n, tail)
    if len(rhos) < 2 * A.shape[1]:
        raise ValueError(f"need at least {2 * A.shape[1]} samples, got {len(rhos)}")
    scale = np.linalg.norm(A, axis=0)
    As = A / scale
    cond = float(np.linalg.cond(As))
    if cond > COND_LIMIT:
        raise IllConditioned(f"condition number {cond:.3g} exceeds {COND_LIMIT:g}")
    coef, *_ = np.linalg.lstsq(As, values, rcond=None)
    for _ in range(2):
        corr, *_ = np.linalg.lstsq(As, values - As @ coef, rcond=None)
        coef = coef + corr
    coef = coef / scale
    resid = float(np.linalg.norm(A @ coef - values) / max(np.linalg.norm(values), 1e-300))
    k = len(powers)
    div = {p: float(c) for p, c in zip(powers, coef[:k])}
    return FitResult(n, div, float(coef[k]), float(coef[k + 1]), cond, resid,
                     tail={p: float(c) for p, c in zip(tails, coef[k + 2:])})


def log_coefficient_from_jet(density_coeff: np.ndarray, g) -> float:
    """F = ½ ∫ e_{n−2} dvol, the log(1/ρ) coefficient read directly off the energy-density jet."""
    return 0.5 * integrate(density_coeff, g)


def renormalized_functional(F: float, n: int, convention: str = "consistent") -> float:
    """Conformal invariant from the log coefficient.

    ``consistent``: +(n a_n)⁻¹ F, the sign under which the result agrees with
    the positive Einstein closed form and with the four-dimensional energy for
    the ruban integrand above. ``literal``: −(n a_n)⁻¹ F.
    """
    factor = 1.0 / float(n * a_n(n))
    if convention == "consistent":
        return factor * F
    if convention == "literal":
        return -factor * F
    raise ValueError(f"unknown convention {convention!r}")


def ladder_csv(rhos: Sequence[float], values: Sequence[float]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["rho", "E"])
    for r, v in zip(rhos, values):
        w.writerow([repr(float(r)), repr(float(v))])
    return buf.getvalue()


def fit_json(fit: FitResult) -> str:
    return json.dumps(fit.to_dict(), indent=2)
