"""Energy functionals on grids and an exact backend for Einstein space forms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .bundle_maps import (
    MapField,
    _tangent_array,
    bundle_codifferential,
    energy_density_array,
    form_inner,
    inner,
    pullback_gradient,
    se_array,
)
from .curvature import ricci_array, scalar_curv_array
from .geometry import Metric, integrate


class DimensionError(ValueError):
    pass


def _need_dim(g: Metric, n: int, what: str):
    if g.dim != n:
        raise DimensionError(f"{what} is defined in dimension {n}, got {g.dim}")


def bienergy(phi: MapField, g: Metric) -> float:
    """½∫|δTφ|²."""
    t, _ = _tangent_array(phi)
    tau = bundle_codifferential(phi, t, g)
    return 0.5 * integrate(inner(tau, tau), g)


def ricci_energy_density(dphi: np.ndarray, g: Metric) -> np.ndarray:
    """Ric^{ij}⟨∂_iφ, ∂_jφ⟩."""
    gi = g.inverse_array
    ric_up = np.einsum("ia...,jb...,ab...->ij...", gi, gi, ricci_array(g))
    return np.einsum("ij...,ia...,ja...->...", ric_up, dphi, dphi)


def e4_density(phi: MapField, g: Metric) -> np.ndarray:
    t, _ = _tangent_array(phi)
    tau = bundle_codifferential(phi, t, g)
    return 0.5 * (
        inner(tau, tau)
        + (2.0 / 3.0) * scalar_curv_array(g) * energy_density_array(t, g)
        - 2.0 * ricci_energy_density(t, g)
    )


def e4_functional(phi: MapField, g: Metric) -> float:
    """½∫(|δTφ|² + ⅔ scal |Tφ|² − 2 Ric(Tφ, Tφ)) dvol, the conformally invariant energy in dim 4."""
    _need_dim(g, 4, "the four-dimensional energy")
    return integrate(e4_density(phi, g), g)


def e6_einstein_functional(phi: MapField, g: Metric, lam: float) -> float:
    """½∫(|dδTφ|² − ⟨Se(δTφ), δTφ⟩ + 40λ|δTφ|² + 384λ²|Tφ|²) for Einstein g with Ric = 20λg."""
    _need_dim(g, 6, "the six-dimensional Einstein energy")
    t, _ = _tangent_array(phi)
    tau = bundle_codifferential(phi, t, g)
    dtau = pullback_gradient(phi, tau, dphi=t)
    dens = (
        form_inner(dtau, dtau, g)
        - inner(se_array(phi, tau, g, t), tau)
        + 40.0 * lam * inner(tau, tau)
        + 384.0 * lam**2 * energy_density_array(t, g)
    )
    return 0.5 * integrate(dens, g)


def e6_identity_value(g: Metric) -> float:
    """(2/25)∫scal² dvol."""
    _need_dim(g, 6, "the six-dimensional identity energy")
    s = scalar_curv_array(g)
    return 0.08 * integrate(s * s, g)


def einstein_closed_form(n: int, lam, energy_integral):
    """2^{n−3} λ^{n/2−1} (n−2)! ∫|Tφ|² for a harmonic map from an Einstein manifold with Ric = 4λ(n−1)g.

    Exact when ``lam`` and ``energy_integral`` are exact (Fraction, PiPower).
    """
    if n % 2 or n < 4:
        raise DimensionError("the Einstein closed form needs even n >= 4")
    if isinstance(lam, (int, Rational)):
        coef = Fraction(2) ** (n - 3) * Fraction(lam) ** (n // 2 - 1) * math.factorial(n - 2)
    else:
        coef = 2.0 ** (n - 3) * lam ** (n // 2 - 1) * math.factorial(n - 2)
    return energy_integral * coef


# ---------------------------------------------------------------------------
# exact values

@dataclass(frozen=True)
class PiPower:
    """Exact number ``coef · π^power`` with rational ``coef``."""

    coef: Fraction
    power: int

    def __post_init__(self):
        object.__setattr__(self, "coef", Fraction(self.coef))

    def __mul__(self, other):
        if isinstance(other, PiPower):
            return PiPower(self.coef * other.coef, self.power + other.power)
        if isinstance(other, (int, Rational)):
            return PiPower(self.coef * other, self.power)
        return float(self) * other

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PiPower):
            return PiPower(self.coef / other.coef, self.power - other.power)
        if isinstance(other, (int, Rational)):
            return PiPower(self.coef / other, self.power)
        return float(self) / other

    def __add__(self, other):
        if isinstance(other, PiPower) and (other.power == self.power or other.coef == 0):
            return PiPower(self.coef + other.coef, self.power)
        if isinstance(other, PiPower) and self.coef == 0:
            return other
        return float(self) + float(other)

    __radd__ = __add__

    def __neg__(self):
        return PiPower(-self.coef, self.power)

    def __sub__(self, other):
        return self + (-other)

    def __float__(self):
        return float(self.coef) * math.pi**self.power

    def __eq__(self, other):
        if isinstance(other, PiPower):
            if self.coef == 0 or other.coef == 0:
                return self.coef == other.coef
            return self.coef == other.coef and self.power == other.power
        if isinstance(other, (int, Rational)):
            return self.coef == other and (self.power == 0 or other == 0)
        return NotImplemented

    def __hash__(self):
        return hash((self.coef, self.power if self.coef else 0))

    def __str__(self):
        return f"{self.coef}*pi^{self.power}"


def unit_sphere_volume(n: int) -> PiPower:
    """Exact volume of the round unit n-sphere, n = 2k: 2^{2k+1} k! π^k / (2k)!."""
    if n % 2:
        raise DimensionError("exact sphere volumes are provided for even n")
    k = n // 2
    return PiPower(Fraction(2 ** (2 * k + 1) * math.factorial(k), math.factorial(2 * k)), k)


@dataclass(frozen=True)
class HomogeneousSpace:
    """Einstein space form with Ric = 4λ(n−1)g, evaluated by constant-field algebra."""

    dim: int
    lam: Fraction
    volume: PiPower
    name: str = "homogeneous"

    def __post_init__(self):
        object.__setattr__(self, "lam", Fraction(self.lam))

    @property
    def scal(self) -> Fraction:
        return 4 * self.lam * self.dim * (self.dim - 1)

    @property
    def ricci_factor(self) -> Fraction:
        return 4 * self.lam * (self.dim - 1)

    @property
    def schouten_factor(self) -> Fraction:
        """Sc = 2λg."""
        return 2 * self.lam

    def bach(self) -> Fraction:
        """Bach tensor norm: Sc is parallel and the Weyl term is a trace of W, so B = 0."""
        return Fraction(0)

    def identity_c6_residual(self) -> Fraction:
        """Every term of the dim-6 identity condition carries ∇scal, ∇Ric or δB."""
        return Fraction(0)


def unit_sphere(n: int) -> HomogeneousSpace:
    return HomogeneousSpace(n, Fraction(1, 4), unit_sphere_volume(n), f"S^{n}")


def round_sphere(n: int, radius: Fraction) -> HomogeneousSpace:
    r = Fraction(radius)
    v = unit_sphere_volume(n)
    return HomogeneousSpace(n, Fraction(1, 4) / r**2, v * r**n, f"S^{n}(r={r})")


def flat_torus_space(n: int) -> HomogeneousSpace:
    """Flat torus with period 2π: volume (2π)^n."""
    return HomogeneousSpace(n, Fraction(0), PiPower(Fraction(2**n), n), f"T^{n}")


@dataclass(frozen=True)
class HomogeneousMap:
    """A harmonic map with constant energy density and constant Ricci energy.

    ``ricci_energy`` is Ric(Tφ,Tφ) summed over a frame; for an Einstein source
    it equals (Ric factor)·|Tφ|², which is the default.
    """

    energy_density: Fraction
    ricci_energy: Fraction | None = None
    harmonic: bool = True


def homogeneous_identity(space: HomogeneousSpace) -> HomogeneousMap:
    return HomogeneousMap(Fraction(space.dim), space.scal)


def _ric_energy(space, m: HomogeneousMap):
    return m.ricci_energy if m.ricci_energy is not None else space.ricci_factor * m.energy_density


def homogeneous_energy_integral(space: HomogeneousSpace, m: HomogeneousMap):
    """∫|Tφ|² dvol."""
    return space.volume * Fraction(m.energy_density)


def homogeneous_e4(space: HomogeneousSpace, m: HomogeneousMap):
    if space.dim != 4:
        raise DimensionError("the four-dimensional energy needs n = 4")
    if not m.harmonic:
        raise ValueError("constant-field evaluation needs δTφ = 0")
    dens = Fraction(1, 2) * (Fraction(2, 3) * space.scal * m.energy_density - 2 * _ric_energy(space, m))
    return space.volume * dens


def homogeneous_e6(space: HomogeneousSpace, m: HomogeneousMap):
    if space.dim != 6:
        raise DimensionError("the six-dimensional energy needs n = 6")
    if not m.harmonic:
        raise ValueError("constant-field evaluation needs δTφ = 0")
    return space.volume * (Fraction(1, 2) * 384 * space.lam**2 * m.energy_density)


def homogeneous_e6_identity(space: HomogeneousSpace):
    return space.volume * (Fraction(2, 25) * space.scal**2)
