"""Maps into flat spaces, flat tori and round spheres, and sections along them.

A map is stored by a continuous lift: for torus targets the lift is
``W·x·(target period / chart period) + periodic part`` with an integer winding
matrix ``W``, so spectral derivatives never see a wrap-around jump. Sphere maps
are unit vectors in R^{m+1}; sections are ambient vectors tangent to the image.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _accel
from .curvature import christoffel_array, codifferential
from .geometry import ChartGrid, Metric, TWO_PI, diff, gradient, integrate

EUCLIDEAN = "euclidean"
FLAT_TORUS = "flat_torus"
ROUND_SPHERE = "round_sphere"
PROJECTION_WARN = 1e-6


class UnderResolved(RuntimeError):
    pass


@dataclass(frozen=True)
class TargetSpace:
    kind: str
    dim: int
    period: float = TWO_PI

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, FLAT_TORUS, ROUND_SPHERE):
            raise ValueError(f"unknown target kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("target dimension must be positive")

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1 if self.kind == ROUND_SPHERE else self.dim

    @property
    def is_flat(self) -> bool:
        return self.kind != ROUND_SPHERE

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "period": self.period}


@dataclass(frozen=True, eq=False)
class MapField:
    target: TargetSpace
    grid: ChartGrid
    periodic: np.ndarray
    winding: np.ndarray | None = None

    def __post_init__(self):
        p = np.array(self.periodic, dtype=float)
        if p.shape != (self.target.ambient_dim,) + self.grid.shape:
            raise ValueError(f"map values have shape {p.shape}")
        if self.target.kind == ROUND_SPHERE:
            norm = np.sqrt(np.sum(p * p, axis=0))
            if np.max(np.abs(norm - 1.0)) > 1e-6:
                raise ValueError("sphere-valued map is not unit length")
            p = p / norm
        p.setflags(write=False)
        object.__setattr__(self, "periodic", p)
        if self.target.kind == FLAT_TORUS:
            w = np.zeros((self.target.dim, self.grid.dim)) if self.winding is None else np.asarray(self.winding, float)
            if w.shape != (self.target.dim, self.grid.dim) or np.any(w != np.round(w)):
                raise ValueError("winding must be an integer (m, n) matrix")
            w.setflags(write=False)
            object.__setattr__(self, "winding", w)
        elif self.winding is not None:
            raise ValueError("only torus targets carry a winding matrix")

    def _slopes(self) -> np.ndarray:
        """d(linear part)/dx_i, shape (m, n)."""
        scale = np.array([self.target.period / p for p in self.grid.period])
        return self.winding * scale[None, :]

    @property
    def lift(self) -> np.ndarray:
        if self.target.kind != FLAT_TORUS:
            return self.periodic
        lin = np.einsum("ai,i...->a...", self._slopes(), np.stack(self.grid.coordinates()))
        return lin + self.periodic

    @property
    def values(self) -> np.ndarray:
        if self.target.kind == FLAT_TORUS:
            return np.mod(self.lift, self.target.period)
        return self.periodic

    def differential(self) -> np.ndarray:
        """dphi[i, a] = ∂_i φ^a in ambient / lifted coordinates (no projection)."""
        d = gradient(self.periodic, self.grid)
        if self.target.kind == FLAT_TORUS:
            d = d + self._slopes().T.reshape((self.grid.dim, self.target.dim) + (1,) * self.grid.dim)
        return d

    def with_periodic(self, periodic: np.ndarray) -> "MapField":
        return MapField(self.target, self.grid, periodic, self.winding)

    def perturb(self, v: np.ndarray, t: float = 1.0) -> "MapField":
        """φ moved by t·v: translation for flat targets, geodesic exponential on the sphere."""
        if self.target.is_flat:
            return self.with_periodic(self.periodic + t * v)
        v = project_tangent(self.periodic, v)
        s = t * np.sqrt(np.sum(v * v, axis=0))
        safe = np.where(s > 0, s, 1.0)
        sinc = np.where(s > 0, np.sin(s) / safe, 1.0)
        out = np.cos(s) * self.periodic + t * sinc * v
        return MapField(self.target, self.grid, out / np.sqrt(np.sum(out * out, axis=0)))

    def to_json(self) -> dict:
        pm = np.moveaxis(self.periodic, 0, -1).reshape(-1)
        return {
            "target": self.target.to_dict(),
            "grid": self.grid.to_dict(),
            "variance": ["target"],
            "data": pm.tolist(),
            "winding": None if self.winding is None else self.winding.astype(int).tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict, method: str = "spectral") -> "MapField":
        t = obj["target"]
        target = TargetSpace(t["kind"], int(t["dim"]), float(t["period"]))
        gd = obj["grid"]
        grid = ChartGrid(int(gd["dim"]), tuple(gd["sizes"]), tuple(gd["period"]), method)
        data = np.asarray(obj["data"], float).reshape(grid.shape + (target.ambient_dim,))
        w = obj.get("winding")
        return cls(target, grid, np.ascontiguousarray(np.moveaxis(data, -1, 0)), None if w is None else np.array(w, float))


def dumps_map(phi: MapField) -> str:
    return json.dumps(phi.to_json())


def loads_map(text: str, method: str = "spectral") -> MapField:
    return MapField.from_json(json.loads(text), method)


@dataclass(frozen=True, eq=False)
class Section:
    """Vector field along φ, shape (m_ambient, *grid)."""

    base: MapField
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class OneFormSection:
    """Element of Ω¹(M)⊗φ*TN, shape (n, m_ambient, *grid)."""

    base: MapField
    values: np.ndarray
    projection_residual: float = 0.0


# ---------------------------------------------------------------------------
# constructors

def identity_map(grid: ChartGrid) -> MapField:
    """Identity of the chart torus onto itself (same period on every axis)."""
    if len(set(grid.period)) != 1:
        raise ValueError("identity needs equal periods on all axes")
    target = TargetSpace(FLAT_TORUS, grid.dim, grid.period[0])
    return MapField(target, grid, np.zeros((grid.dim,) + grid.shape), np.eye(grid.dim))


def torus_map(grid: ChartGrid, winding, periodic, period: float = TWO_PI) -> MapField:
    w = np.asarray(winding, float)
    return MapField(TargetSpace(FLAT_TORUS, w.shape[0], period), grid, periodic, w)


def euclidean_map(grid: ChartGrid, values) -> MapField:
    v = np.asarray(values, float)
    if v.ndim == grid.dim:
        v = v[None]
    return MapField(TargetSpace(EUCLIDEAN, v.shape[0]), grid, v)


def sphere_map(grid: ChartGrid, values) -> MapField:
    v = np.asarray(values, float)
    v = v / np.sqrt(np.sum(v * v, axis=0))
    return MapField(TargetSpace(ROUND_SPHERE, v.shape[0] - 1), grid, v)


# ---------------------------------------------------------------------------
# pointwise algebra

def inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Target inner product of two sections (target index first)."""
    return np.sum(a * b, axis=0)


def project_tangent(p: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Remove the normal component ⟨v, p⟩p; v may carry leading form indices."""
    lead = v.ndim - p.ndim
    pp = p[(None,) * lead]
    return v - np.sum(v * pp, axis=lead, keepdims=True) * pp


def _tangent_array(phi: MapField) -> tuple[np.ndarray, float]:
    d = phi.differential()
    if phi.target.kind != ROUND_SPHERE:
        return d, 0.0
    proj = project_tangent(phi.periodic, d)
    resid = float(np.max(np.abs(d - proj))) if d.size else 0.0
    return proj, resid


def tangent_map(phi: MapField, strict: bool = False) -> OneFormSection:
    d, resid = _tangent_array(phi)
    if strict and resid > PROJECTION_WARN:
        raise UnderResolved(f"tangency residual {resid:.2e} exceeds {PROJECTION_WARN:g}")
    return OneFormSection(phi, d, resid)


def energy_density_array(dphi: np.ndarray, g: Metric) -> np.ndarray:
    """|Tφ|² = g^{ij}⟨∂_iφ, ∂_jφ⟩."""
    return np.einsum("ij...,ia...,ja...->...", g.inverse_array, dphi, dphi)


def energy_density(t, g: Metric) -> np.ndarray:
    arr = t.values if isinstance(t, OneFormSection) else t
    return energy_density_array(arr, g)


def dirichlet_energy(phi: MapField, g: Metric) -> float:
    return 0.5 * integrate(energy_density_array(_tangent_array(phi)[0], g), g)


def form_inner(a: np.ndarray, b: np.ndarray, g: Metric) -> np.ndarray:
    """⟨A, B⟩ for two Ω¹⊗φ*TN arrays."""
    return np.einsum("ij...,ia...,ja...->...", g.inverse_array, a, b)


# ---------------------------------------------------------------------------
# connection, divergence, tension

def bundle_codifferential(phi: MapField, w: np.ndarray, g: Metric) -> np.ndarray:
    """δW = −g^{ij}∇_i W_j for W ∈ Ω¹⊗φ*TN.

    For the sphere the Gauss term of the pullback connection is exactly the
    normal part of the ambient divergence, so it is dropped by projection.
    """
    out = codifferential(w, g)
    if phi.target.kind == ROUND_SPHERE:
        out = project_tangent(phi.periodic, out)
    return out


def tension_array(phi: MapField, g: Metric) -> np.ndarray:
    return bundle_codifferential(phi, _tangent_array(phi)[0], g)


def tension(phi: MapField, g: Metric) -> Section:
    """δ^g Tφ."""
    return Section(phi, tension_array(phi, g))


def pullback_gradient(phi: MapField, v: np.ndarray, g: Metric | None = None, dphi=None) -> np.ndarray:
    """∇V with the new direction index first.

    Sections (m, *grid) give (n, m, *grid). One-form sections (n, m, *grid)
    give (n, n, m, *grid) and, when ``g`` is supplied, include the Levi-Civita
    correction on the form index.
    """
    grid = phi.grid
    out = gradient(v, grid)
    if phi.target.kind == ROUND_SPHERE:
        d = phi.differential() if dphi is None else dphi
        lead = v.ndim - 1 - grid.dim  # number of form indices in v
        if lead == 0:
            coef = np.einsum("ia...,a...->i...", d, v)
            out = out + coef[:, None] * phi.periodic[None]
        else:
            coef = np.einsum("ia...,ja...->ij...", d, v)
            out = out + coef[:, :, None] * phi.periodic[None, None]
    if g is not None and v.ndim - 1 - grid.dim == 1:
        gam = christoffel_array(g)
        out = out - np.einsum("kij...,ka...->ija...", gam, v)
    return out


def pullback_connection_derivative(v, i: int, g: Metric | None = None):
    """Component ``i`` of the pullback covariant derivative of a (one-form) section."""
    base, arr = v.base, v.values
    full = pullback_gradient(base, arr, g)
    if isinstance(v, OneFormSection):
        return OneFormSection(base, full[i])
    return Section(base, full[i])


def rough_laplacian(phi: MapField, v: np.ndarray, g: Metric) -> np.ndarray:
    """δ∇V = ∇*∇V on sections along φ."""
    return bundle_codifferential(phi, pullback_gradient(phi, v), g)


# ---------------------------------------------------------------------------
# target curvature

def target_curvature(target: TargetSpace, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """R^h_{X,Y}Z; the unit sphere has R_{X,Y}Z = ⟨Y,Z⟩X − ⟨X,Z⟩Y."""
    if target.is_flat:
        return np.zeros(np.broadcast_shapes(x.shape, y.shape, z.shape))
    return inner(y, z) * x - inner(x, z) * y


def se_array(phi: MapField, x: np.ndarray, g: Metric, dphi: np.ndarray | None = None) -> np.ndarray:
    """Se(X) = Σ_k R^h_{X,Tφ(e_k)}Tφ(e_k) over a g-orthonormal frame.

    Σ_k e_k^a e_k^b = g^{ab}, so the frame sum is evaluated with the inverse
    metric; for the sphere this is |Tφ|²X − g^{ab}⟨X,∂_bφ⟩∂_aφ.
    """
    if phi.target.is_flat:
        return np.zeros_like(x)
    d = _tangent_array(phi)[0] if dphi is None else dphi
    n, m = d.shape[0], d.shape[1]
    npts = phi.grid.npoints
    out = _accel.sphere_se(x.reshape(m, npts), d.reshape(n, m, npts), g.inverse_array.reshape(n, n, npts))
    return out.reshape(x.shape)


def se_endomorphism(phi: MapField, g: Metric, x) -> Section:
    arr = x.values if isinstance(x, Section) else x
    return Section(phi, se_array(phi, arr, g))


def random_smooth_field(rng: np.random.Generator, grid: ChartGrid, amplitude: float = 1.0, modes: int = 2, lead=()) -> np.ndarray:
    """Random trigonometric polynomial with wavenumbers |k_a| ≤ modes, zero mean, max-norm ~ amplitude."""
    shape = tuple(lead) + grid.shape
    coords = grid.coordinates()
    out = np.zeros(shape)
    nterms = 3 * grid.dim
    for idx in np.ndindex(*lead) if lead else [()]:
        acc = np.zeros(grid.shape)
        for _ in range(nterms):
            k = rng.integers(-modes, modes + 1, size=grid.dim)
            if not np.any(k):
                continue
            phase = sum(k[a] * TWO_PI / grid.period[a] * coords[a] for a in range(grid.dim))
            acc += rng.normal() * np.cos(phase + rng.uniform(0, TWO_PI))
        scale = np.max(np.abs(acc))
        out[idx] = acc * (amplitude / scale if scale > 0 else 0.0)
    return out
