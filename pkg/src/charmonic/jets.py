"""Truncated power series in the boundary variable r, with one log slot.

A jet of order n is c_0 + c_1 r + … + c_n r^n + L r^n log r. Coefficients are
numpy arrays whose trailing axes are the grid (or exact scalars such as
Fractions for the constant-field path). A slot may be *undetermined*: it
propagates through arithmetic and raises when read.

The harmonic-extension recurrence for flat targets: with φ̃ = Σ u_k r^k and

    L(r) = δ^{g_r} Tφ̃ − ½ tr(g_r⁻¹ g_r′) ∂_r φ̃,

the coefficients satisfy k(k−n) u_k = [L]_{k−2} for 2 ≤ k < n, and the log
coefficient of the extension is H = [L]_{n−2} / n.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .bundle_maps import MapField
from .curvature import bach_array, schouten_array, scalar_curv_array
from .geometry import ChartGrid, Metric, diff, gradient, integrate


class UndeterminedSlotError(LookupError):
    pass


class ClassicalCase(UserWarning):
    pass


_UND = None  # marker for an undetermined slot


def _mul_default(a, b):
    return a * b


def matmul(a, b):
    """Pointwise matrix product of (n, n, *grid) fields."""
    return np.einsum("ij...,jk...->ik...", a, b)


class RJet:
    """c_0 + … + c_n r^n + log_coeff · r^n log r, truncated at order n."""

    def __init__(self, coeffs: Sequence, order: int | None = None, log=0, parity_tag: str = "none"):
        coeffs = list(coeffs)
        self.order = len(coeffs) - 1 if order is None else order
        if len(coeffs) < self.order + 1:
            coeffs += [_zero_like(coeffs[0])] * (self.order + 1 - len(coeffs))
        self._c = coeffs[: self.order + 1]
        self._log = log
        self.parity_tag = parity_tag
        if parity_tag == "even_to_nm1":
            for k in range(1, self.order, 2):
                c = self._c[k]
                if c is not _UND and np.any(np.asarray(c) != 0):
                    raise ValueError(f"odd coefficient {k} is not zero")

    # access -------------------------------------------------------------
    def coeff(self, k: int):
        if k > self.order:
            raise IndexError(f"order {k} beyond truncation {self.order}")
        c = self._c[k]
        if c is _UND:
            raise UndeterminedSlotError(f"coefficient r^{k} is undetermined")
        return c

    def is_determined(self, k: int) -> bool:
        return self._c[k] is not _UND

    @property
    def log_coeff(self):
        if self._log is _UND:
            raise UndeterminedSlotError("log coefficient is undetermined")
        return self._log

    def log_is_determined(self) -> bool:
        return self._log is not _UND

    @property
    def raw(self) -> list:
        return list(self._c)

    @property
    def undetermined_mask(self) -> list[bool]:
        return [c is _UND for c in self._c]

    def truncate(self, order: int) -> "RJet":
        log = self._log if order == self.order else 0
        return RJet(self._c[: order + 1], order, log)

    def map(self, fn: Callable) -> "RJet":
        """Apply a linear map (e.g. a spatial derivative) coefficientwise."""
        c = [_UND if x is _UND else fn(x) for x in self._c]
        log = _UND if self._log is _UND else (fn(self._log) if _nonzero(self._log) else 0)
        return RJet(c, self.order, log)

    def scale(self, s) -> "RJet":
        return self.map(lambda x: s * x)

    def r_derivative(self) -> "RJet":
        """d/dr of the polynomial part (order drops by one, log slot dropped)."""
        c = [_UND if self._c[k] is _UND else k * self._c[k] for k in range(1, self.order + 1)]
        return RJet(c, self.order - 1)

    def shift(self, s: int) -> "RJet":
        """Multiply by r^s, keeping the order."""
        z = _zero_like(next(x for x in self._c if x is not _UND))
        return RJet([z] * s + self._c[: self.order + 1 - s], self.order)

    def __add__(self, other):
        return jet_add(self, other)

    def __sub__(self, other):
        return jet_add(self, other.scale(-1))

    def __mul__(self, other):
        return jet_mul(self, other)

    def __repr__(self):
        return f"RJet(order={self.order}, undetermined={self.undetermined_mask}, parity={self.parity_tag})"


def _zero_like(x):
    if isinstance(x, np.ndarray):
        return np.zeros_like(x)
    if isinstance(x, (Fraction, int)):
        return Fraction(0)
    return 0.0


def _nonzero(x) -> bool:
    if x is _UND:
        return True
    if isinstance(x, np.ndarray):
        return True
    return x != 0


def constant_jet(value, order: int) -> RJet:
    return RJet([value] + [_zero_like(value)] * order, order)


def jet_add(a: RJet, b: RJet) -> RJet:
    order = min(a.order, b.order)
    c = [_UND if (x is _UND or y is _UND) else x + y for x, y in zip(a.raw[: order + 1], b.raw[: order + 1])]
    la = a._log if a.order == order else 0
    lb = b._log if b.order == order else 0
    log = _UND if (la is _UND or lb is _UND) else _add_log(la, lb)
    return RJet(c, order, log)


def _add_log(a, b):
    if not _nonzero(a):
        return b
    if not _nonzero(b):
        return a
    return a + b


def jet_mul(a: RJet, b: RJet, product: Callable = _mul_default) -> RJet:
    """Truncated Cauchy product; the log slot couples only to the other degree-0 coefficient."""
    order = min(a.order, b.order)
    ca, cb = a.raw, b.raw
    out = []
    for k in range(order + 1):
        acc = None
        for j in range(k + 1):
            x, y = ca[j], cb[k - j]
            if x is _UND or y is _UND:
                if _is_zero(x) or _is_zero(y):
                    continue
                acc = _UND
                break
            term = product(x, y)
            acc = term if acc is None else acc + term
        out.append(acc)
    la = a._log if a.order == order else 0
    lb = b._log if b.order == order else 0
    log = 0
    if la is _UND or lb is _UND:
        log = _UND
    else:
        if _nonzero(la):
            log = product(la, cb[0])
        if _nonzero(lb):
            t = product(ca[0], lb)
            log = t if not _nonzero(log) else log + t
    return RJet(out, order, log)


def _is_zero(x) -> bool:
    if x is _UND:
        return False
    if isinstance(x, np.ndarray):
        return not np.any(x)
    return x == 0


def jet_scalar_div(a: RJet, b: RJet) -> RJet:
    """a / b for a scalar jet b with invertible degree-0 coefficient."""
    order = min(a.order, b.order)
    b0 = b.coeff(0)
    if np.any(np.asarray(b0) == 0):
        raise ZeroDivisionError("degree-0 coefficient of the divisor vanishes")
    ca, cb = a.raw, b.raw
    out = []
    for k in range(order + 1):
        if ca[k] is _UND:
            out.append(_UND)
            continue
        acc = ca[k]
        bad = False
        for j in range(k):
            if out[j] is _UND or cb[k - j] is _UND:
                if _is_zero(cb[k - j]) or (out[j] is not _UND and _is_zero(out[j])):
                    continue
                bad = True
                break
            acc = acc - out[j] * cb[k - j]
        out.append(_UND if bad else acc / b0)
    la = a._log if a.order == order else 0
    lb = b._log if b.order == order else 0
    if la is _UND or lb is _UND:
        log = _UND
    else:
        log = 0
        if _nonzero(la):
            log = la / b0
        if _nonzero(lb):
            t = out[0] * lb / b0
            log = -t if not _nonzero(log) else log - t
    return RJet(out, order, log)


def jet_series(a: RJet, coefficients: Sequence, product: Callable = _mul_default, one=None) -> RJet:
    """Σ_k coefficients[k] a^k for a jet with zero constant term (or a formal series)."""
    order = a.order
    unit = one if one is not None else _zero_like(a.raw[1] if a.order else a.raw[0]) + 1
    acc = constant_jet(coefficients[0] * unit, order)
    power = constant_jet(unit, order)
    for k in range(1, min(len(coefficients), order + 1)):
        power = jet_mul(power, a, product)
        if coefficients[k]:
            acc = jet_add(acc, power.scale(coefficients[k]))
    return acc


def jet_exp(a: RJet) -> RJet:
    """exp of a scalar jet."""
    c0 = a.coeff(0)
    rest = RJet([_zero_like(c0)] + a.raw[1:], a.order, a._log)
    coeffs = [Fraction(1, math.factorial(k)) for k in range(a.order + 1)]
    if isinstance(c0, np.ndarray) or isinstance(c0, float):
        coeffs = [float(c) for c in coeffs]
        scale = np.exp(c0)
    else:
        if c0 != 0:
            raise ValueError("exact exp needs a zero constant term")
        scale = Fraction(1)
    return jet_series(rest, coeffs).map(lambda x: scale * x)


def jet_log1p(a: RJet) -> RJet:
    """log(1 + a) for a jet with zero constant term."""
    coeffs = [0] + [Fraction((-1) ** (k + 1), k) for k in range(1, a.order + 1)]
    if isinstance(a.raw[0], (np.ndarray, float)):
        coeffs = [float(c) for c in coeffs]
    return jet_series(a, coeffs)


def jet_sqrt(a: RJet) -> RJet:
    """√a for a scalar jet with positive constant term, via a = c_0(1 + x)."""
    c0 = a.coeff(0)
    x = jet_scalar_div(a, constant_jet(c0, a.order))
    x = RJet([_zero_like(c0)] + x.raw[1:], a.order, x._log)
    coeffs = [_binom_half(k) for k in range(a.order + 1)]
    root = np.sqrt(c0) if isinstance(c0, (np.ndarray, float)) else None
    if root is None:
        raise TypeError("exact square roots are not supported")
    return jet_series(x, [float(c) for c in coeffs]).map(lambda y: root * y)


def _binom_half(k: int) -> Fraction:
    out = Fraction(1)
    for j in range(k):
        out *= Fraction(1, 2) - j
        out /= j + 1
    return out


# ---------------------------------------------------------------------------
# metric jets

@dataclass
class MetricJet:
    """g_r as a jet of (0,2) fields plus the volume ratio √(det g_r / det g)."""

    g: Metric
    metric: RJet
    volume: RJet
    dim: int
    mode: str
    top_trace: object = None  # tr_g of the top coefficient when only its trace is known

    def inverse(self, order: int | None = None) -> RJet:
        """g_r⁻¹ = Σ (−A)^k g⁻¹ with A = g⁻¹(g_r − g)."""
        order = self.metric.order if order is None else order
        gi = self.g.inverse_array
        a = self.metric.truncate(order).map(lambda c: matmul(gi, c))
        a = RJet([np.zeros_like(gi)] + a.raw[1:], order, 0)
        n = self.g.dim
        eye = np.broadcast_to(np.eye(n).reshape((n, n) + (1,) * n), gi.shape).copy()
        series = jet_series(a, [(-1) ** k for k in range(order + 1)], matmul, one=eye)
        return series.map(lambda c: matmul(c, gi))


def _volume_jet(g: Metric, metric: RJet, top_trace=None) -> RJet:
    """√det(I + A) = exp(½ tr log(I + A)); a top slot known only through its trace is linear there."""
    n = g.dim
    gi = g.inverse_array
    order = metric.order
    raw = metric.raw
    top_und = raw[order] is _UND
    c = [np.zeros_like(gi)] + [
        (np.zeros_like(gi) if (k == order and top_und) else matmul(gi, raw[k])) for k in range(1, order + 1)
    ]
    a = RJet(c, order, 0 if not metric.log_is_determined() else (matmul(gi, metric._log) if _nonzero(metric._log) else 0))
    eye = np.broadcast_to(np.eye(n).reshape((n, n) + (1,) * n), gi.shape).copy()
    coeffs = [0.0] + [(-1.0) ** (k + 1) / k for k in range(1, order + 1)]
    log_mat = jet_series(a, coeffs, matmul, one=eye)
    half_tr = log_mat.map(lambda m: 0.5 * np.einsum("ii...->...", m))
    vol = jet_exp(half_tr)
    if top_und:
        c = vol.raw
        c[order] = _UND if top_trace is None else c[order] + 0.5 * top_trace
        vol = RJet(c, order, vol._log)
    return vol


def poincare_metric_jet(g: Metric, dim: int | None = None, mode: str = "general", lam: float = 0.0) -> MetricJet:
    """Expansion of g_r up to r^n.

    general, n = 2: [g, 0, undetermined] with tr_g g_(2) = −½ scal.
    general, n = 4: [g, 0, −Sc, 0, undetermined], log slot −⅓B, tr_g g_(4) = ¼ tr(Sc∘Sc).
    general, n = 6: [g, 0, −Sc, 0, ¼ Sc∘Sc − ⅛B, 0, undetermined].
    einstein: g_r = (1 − λr²)² g exactly, [g, 0, −2λg, 0, λ²g, 0, …], log slot 0.
    """
    n = g.dim if dim is None else dim
    if n != g.dim:
        raise ValueError("jet dimension must match the metric")
    if n not in (2, 4, 6):
        raise ValueError("metric jets are provided for n = 2, 4, 6")
    z = np.zeros_like(g.g)
    if mode == "einstein":
        c = [z] * (n + 1)
        c[0], c[2], c[4] = g.g, -2.0 * lam * g.g, (lam**2) * g.g if n >= 4 else None
        c = [x if x is not None else z for x in c[: n + 1]]
        if n == 2:
            c = [g.g, z, -2.0 * lam * g.g]
        metric = RJet(c, n, 0)
        return MetricJet(g, metric, _volume_jet(g, metric), n, mode)
    if mode != "general":
        raise ValueError(f"unknown mode {mode!r}")
    if n == 2:
        metric = RJet([g.g, z, _UND], 2, 0)
        top_trace = -0.5 * scalar_curv_array(g)
        return MetricJet(g, metric, _volume_jet(g, metric, top_trace), n, mode, top_trace)
    sc = schouten_array(g)
    sc_sq = np.einsum("ia...,ab...,bj...->ij...", sc, g.inverse_array, sc)
    if n == 4:
        metric = RJet([g.g, z, -sc, z, _UND], 4, -bach_array(g) / 3.0)
        top_trace = 0.25 * np.einsum("ij...,ij...->...", g.inverse_array, sc_sq)
        return MetricJet(g, metric, _volume_jet(g, metric, top_trace), n, mode, top_trace)
    metric = RJet([g.g, z, -sc, z, 0.25 * sc_sq - bach_array(g) / 8.0, z, _UND], 6, 0)
    return MetricJet(g, metric, _volume_jet(g, metric, None), n, mode)


# ---------------------------------------------------------------------------
# harmonic extension of flat-target maps

@dataclass
class PhiJet:
    jet: RJet  # coefficients u_k of φ̃ (u_0 is the lift), log slot H
    base: MapField
    n: int
    classical: bool = False

    @property
    def H(self):
        return self.jet.log_coeff


def _spatial_gradient_jet(u: RJet, base: MapField) -> RJet:
    """∂_a φ̃ as a jet with the direction index first; u_0 is differentiated as a map."""
    grid = base.grid
    c = [base.differential()] + [
        _UND if x is _UND else gradient(x, grid) for x in u.raw[1:]
    ]
    return RJet(c, u.order)


def _L_jet(u: RJet, base: MapField, mj: MetricJet, order: int) -> RJet:
    """δ^{g_r}Tφ̃ − ½ tr(g_r⁻¹g_r′) ∂_rφ̃ up to r^order."""
    g = mj.g
    grid = g.grid
    gi_r = mj.inverse(order + 1).truncate(order)
    vol = mj.volume.truncate(order).map(lambda v: v * g.volume_density)
    u = u.truncate(order + 1)
    du = _spatial_gradient_jet(u, base).truncate(order)
    # flux^a = vol · G^{ab} ∂_b φ̃
    prod = jet_mul(gi_r, du, lambda G, d: np.einsum("ab...,bm...->am...", G, d))
    flux = jet_mul(vol, prod, lambda v, f: v * f)
    div = flux.map(lambda f: sum(diff(f[a], a, grid) for a in range(grid.dim)))
    tension = jet_scalar_div(div, vol).scale(-1.0)
    # ½ tr(g_r⁻¹ g_r′) = ∂_r log vol
    dvol = mj.volume.truncate(order + 1).r_derivative()
    half_tr = jet_scalar_div(dvol, mj.volume.truncate(order))
    dr_u = u.r_derivative()
    drag = jet_mul(half_tr, dr_u, lambda s, v: s * v)
    return jet_add(tension, drag.scale(-1.0))


def solve_phi_jet(phi: MapField, g: Metric, mj: MetricJet | None = None) -> PhiJet:
    """Formal harmonic extension of a flat-target map; returns the u_k and H."""
    if not phi.target.is_flat:
        raise NotImplementedError("jets are implemented for flat targets only")
    n = g.dim
    if n % 2:
        raise ValueError("even dimension required on the grid path")
    mj = poincare_metric_jet(g) if mj is None else mj
    m = phi.target.ambient_dim
    zero = np.zeros((m,) + g.grid.shape)
    coeffs = [phi.lift] + [zero] * n
    if n == 2:
        L = _L_jet(RJet(coeffs, n), phi, mj, 0)
        c = [phi.lift, zero, _UND]
        return PhiJet(RJet(c, 2, L.coeff(0) / 2.0), phi, n, classical=True)
    for k in range(2, n):
        if k % 2:
            continue  # [L]_{k−2} vanishes for odd k
        L = _L_jet(RJet(coeffs, n), phi, mj, k - 2)
        coeffs[k] = L.coeff(k - 2) / (k * (k - n))
    L = _L_jet(RJet(coeffs, n), phi, mj, n - 2)
    H = L.coeff(n - 2) / n
    coeffs[n] = _UND
    return PhiJet(RJet(coeffs, n, H, parity_tag="even_to_nm1"), phi, n)


def energy_density_jet(pj: PhiJet, mj: MetricJet, order: int | None = None) -> RJet:
    """(|∂_rφ̃|² + g_r^{ab}⟨∂_aφ̃, ∂_bφ̃⟩) · √(det g_r / det g), up to r^{n−2}."""
    order = pj.n - 2 if order is None else order
    u = pj.jet.truncate(order + 1)
    du = _spatial_gradient_jet(u, pj.base).truncate(order)
    dr = u.r_derivative()
    gi_r = mj.inverse(order + 1).truncate(order)
    radial = jet_mul(dr, dr, lambda a, b: np.sum(a * b, axis=0))
    gd = jet_mul(gi_r, du, lambda G, d: np.einsum("ab...,bm...->am...", G, d))
    tangential = jet_mul(gd, du, lambda a, b: np.sum(a * b, axis=(0, 1)))
    return jet_mul(jet_add(radial, tangential), mj.volume.truncate(order))


def functional_from_jet(density: RJet, n: int, g: Metric) -> float:
    """(1 / (2n a_n)) ∫ e_{n−2} dvol."""
    from .operators import a_n

    return float(1 / (2 * n * a_n(n))) * integrate(density.coeff(n - 2), g)


# ---------------------------------------------------------------------------
# exact constant-field path: one Laplace eigenmode on an Einstein manifold

@dataclass
class EigenJetResult:
    u: list  # u_k as Fractions (None where undetermined)
    H: Fraction | None
    n: int
    log_present: bool


def eigenmode_jet(n: int, lam, mu) -> EigenJetResult:
    """Recurrence for φ = f with δd f = μ f and g_r = (1 − λr²)² g, in exact arithmetic.

    Here δ^{g_r}Tφ̃ = (1−λr²)^{−2} μ φ̃ and ½ tr(g_r⁻¹g_r′) = −2nλr/(1−λr²). For
    odd n the same driver is a parity dry run: no log slot appears and u_n is
    left undetermined.
    """
    lam, mu = Fraction(lam), Fraction(mu)
    order = n
    one_minus = RJet([Fraction(1), Fraction(0), -lam] + [Fraction(0)] * (order - 2), order)
    inv2 = jet_scalar_div(constant_jet(Fraction(1), order), jet_mul(one_minus, one_minus))
    half_tr = jet_scalar_div(RJet([Fraction(0), -2 * n * lam] + [Fraction(0)] * (order - 1), order), one_minus)
    u = [Fraction(1)] + [Fraction(0)] * n

    def L_coeff(m):
        phi = RJet(u, order)
        lap = jet_mul(inv2, phi).scale(mu)
        drag = jet_mul(half_tr, RJet(phi.r_derivative().raw + [Fraction(0)], order))
        return (lap - drag).coeff(m)

    for k in range(2, n):
        u[k] = L_coeff(k - 2) / (k * (k - n))
    top = L_coeff(n - 2)
    if n % 2:
        if top != 0:
            raise AssertionError("odd-n recurrence produced a log obstruction")
        return EigenJetResult(u[:n] + [None], None, n, False)
    return EigenJetResult(u[:n] + [None], top / n, n, True)


# ---------------------------------------------------------------------------
# dumps

def _coeff_json(c, grid: ChartGrid):
    if c is _UND:
        return None
    arr = np.asarray(c, dtype=float)
    lead = arr.ndim - grid.dim
    pm = np.moveaxis(arr, tuple(range(lead)), tuple(range(arr.ndim - lead, arr.ndim))).reshape(-1)
    return {"grid": grid.to_dict(), "shape": list(arr.shape[:lead]), "data": pm.tolist()}


def jet_to_json(jet: RJet, grid: ChartGrid) -> dict:
    return {
        "order": jet.order,
        "coeffs": [_coeff_json(c, grid) for c in jet.raw],
        "log": _coeff_json(jet._log, grid) if _nonzero(jet._log) else 0,
        "undetermined": jet.undetermined_mask,
        "parity_tag": jet.parity_tag,
    }


def _coeff_from_json(obj, grid: ChartGrid):
    if obj is None:
        return _UND
    shape = tuple(obj["shape"])
    pm = np.asarray(obj["data"], float).reshape(grid.shape + shape)
    lead = len(shape)
    return np.ascontiguousarray(np.moveaxis(pm, tuple(range(grid.dim, grid.dim + lead)), tuple(range(lead))))


def jet_from_json(obj: dict, grid: ChartGrid) -> RJet:
    coeffs = [_coeff_from_json(c, grid) for c in obj["coeffs"]]
    log = obj["log"]
    log = 0 if log == 0 else _coeff_from_json(log, grid)
    return RJet(coeffs, obj["order"], log, obj.get("parity_tag", "none"))


def dumps_jet(jet: RJet, grid: ChartGrid) -> str:
    return json.dumps(jet_to_json(jet, grid))
