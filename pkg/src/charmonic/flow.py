"""Gradient descent on the four-dimensional energy.

The L² gradient of 𝓔⁴ is the Euler–Lagrange expression el4 = H / a₄, so the
descent direction is −el4 = 16H. An optional (1 + Δ)⁻² smoothing of the
direction compensates for the fourth-order stiffness.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .bundle_maps import ROUND_SPHERE, MapField, project_tangent
from .functionals import e4_functional
from .geometry import Metric, apply_fourier_multiplier, grid_laplacian_symbol, integrate
from .operators import a_n, el4_array, section_l2_norm


class StepUnderflow(RuntimeError):
    pass


@dataclass
class FlowState:
    phi: MapField
    energy: float
    gradient: np.ndarray  # el4
    h_norm: float


def _state(phi: MapField, g: Metric) -> FlowState:
    grad = el4_array(phi, g)
    return FlowState(phi, e4_functional(phi, g), grad, section_l2_norm(float(a_n(4)) * grad, g))


def descent_direction(state: FlowState, g: Metric, precondition: bool) -> np.ndarray:
    d = -state.gradient
    if precondition:
        sym = 1.0 / (1.0 + grid_laplacian_symbol(g.grid)) ** 2
        d = apply_fourier_multiplier(d, sym, g.grid)
    if state.phi.target.kind == ROUND_SPHERE:
        d = project_tangent(state.phi.periodic, d)
    return d


def flow_step(state: FlowState, g: Metric, step: float, precondition: bool = False,
              armijo: float = 1e-4, shrink: float = 0.5, min_step: float = 1e-14,
              max_step: float | None = None) -> tuple[FlowState, float]:
    """One Armijo-backtracked step; returns the new state and the accepted step size."""
    d = descent_direction(state, g, precondition)
    slope = integrate(np.sum(state.gradient * d, axis=0), g)  # d𝓔⁴(d) = ∫⟨el4, d⟩
    if slope >= 0:
        raise StepUnderflow("direction is not a descent direction")
    s = step
    while s >= min_step:
        trial = _state(state.phi.perturb(d, s), g)
        if trial.energy <= state.energy + armijo * s * slope:
            return trial, s
        s *= shrink
    raise StepUnderflow(f"no acceptable step above {min_step:g}")


@dataclass
class FlowReport:
    phi: MapField
    converged: bool
    energies: list
    h_norms: list
    steps: list
    message: str = ""

    def trajectory_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["iter", "E4", "H_norm", "step"])
        for k, (e, h) in enumerate(zip(self.energies, self.h_norms)):
            w.writerow([k, repr(e), repr(h), repr(self.steps[k - 1]) if k else ""])
        return buf.getvalue()

    def monotone(self, rtol: float = 1e-12) -> bool:
        e = np.asarray(self.energies)
        return bool(np.all(np.diff(e) <= rtol * np.maximum(1.0, np.abs(e[:-1]))))


def run_flow(phi0: MapField, g: Metric, tol: float = 1e-6, max_iter: int = 500, step0: float = 1.0,
             precondition: bool = True, grow: float = 2.0) -> FlowReport:
    """Descend until ‖H‖_{L²} ≤ tol; the trial step grows after each accepted step."""
    if g.dim != 4:
        raise ValueError("the flow is defined for dim 4")
    state = _state(phi0, g)
    energies, norms, steps = [state.energy], [state.h_norm], []
    step = step0
    for _ in range(max_iter):
        if state.h_norm <= tol:
            return FlowReport(state.phi, True, energies, norms, steps, "converged")
        try:
            state, s = flow_step(state, g, step, precondition)
        except StepUnderflow as exc:
            return FlowReport(state.phi, False, energies, norms, steps, f"stalled: {exc}")
        energies.append(state.energy)
        norms.append(state.h_norm)
        steps.append(s)
        step = min(s * grow, 1e6) if math.isfinite(s) else step0
    ok = state.h_norm <= tol
    return FlowReport(state.phi, ok, energies, norms, steps, "converged" if ok else "max_iter reached")
