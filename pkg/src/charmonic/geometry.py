"""Periodic coordinate grids, tensor fields and metrics.

Arrays carry tensor indices first and grid axes last, so a (0,2) tensor on a
16^4 grid has shape ``(4, 4, 16, 16, 16, 16)``. Contractions are written with
``np.einsum`` and an ellipsis for the grid part.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sfft

from . import _accel

COVARIANT = "covariant"
CONTRAVARIANT = "contravariant"
TWO_PI = 2.0 * math.pi
SUPPORTED_DIMS = (2, 4, 6)


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class ChartGrid:
    """Uniform periodic grid on a coordinate torus."""

    dim: int
    sizes: tuple[int, ...]
    period: tuple[float, ...] | None = None
    method: str = "spectral"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if self.dim not in SUPPORTED_DIMS:
            raise GridError(f"dim must be one of {SUPPORTED_DIMS}, got {self.dim}")
        if len(sizes) != self.dim:
            raise GridError(f"expected {self.dim} sizes, got {len(sizes)}")
        for axis, s in enumerate(sizes):
            if s < 8:
                raise GridError(f"axis {axis}: size {s} is below the minimum of 8")
            if s % 2:
                raise GridError(f"axis {axis}: size {s} is odd")
        period = (TWO_PI,) * self.dim if self.period is None else tuple(float(p) for p in self.period)
        if len(period) != self.dim or min(period) <= 0:
            raise GridError("period must hold one positive length per axis")
        object.__setattr__(self, "period", period)
        if self.method not in ("spectral", "fd4"):
            raise GridError(f"unknown differentiation method {self.method!r}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.sizes

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(p / s for p, s in zip(self.period, self.sizes))

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def coordinate_volume(self) -> float:
        return float(np.prod(self.period))

    def axis_coords(self, axis: int) -> np.ndarray:
        return np.arange(self.sizes[axis]) * self.spacing[axis]

    def coordinate(self, axis: int) -> np.ndarray:
        """Coordinate ``x_axis`` as a full grid array."""
        shape = [1] * self.dim
        shape[axis] = self.sizes[axis]
        return np.broadcast_to(self.axis_coords(axis).reshape(shape), self.shape).copy()

    def coordinates(self) -> list[np.ndarray]:
        return [self.coordinate(a) for a in range(self.dim)]

    def with_method(self, method: str) -> "ChartGrid":
        return ChartGrid(self.dim, self.sizes, self.period, method)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "sizes": list(self.sizes), "period": list(self.period)}


# ---------------------------------------------------------------------------
# differentiation on raw arrays (grid axes trailing)

def _wavenumbers(grid: ChartGrid, axis: int) -> np.ndarray:
    n = grid.sizes[axis]
    return TWO_PI / grid.period[axis] * np.arange(n // 2 + 1)


def diff(a: np.ndarray, axis: int, grid: ChartGrid) -> np.ndarray:
    """Periodic derivative along grid ``axis`` of an array whose trailing axes are the grid."""
    ax = a.ndim - grid.dim + axis
    if grid.method == "fd4":
        return _accel.fd4_derivative(a, ax, grid.spacing[axis])
    n = grid.sizes[axis]
    k = _wavenumbers(grid, axis)
    shape = [1] * a.ndim
    shape[ax] = k.size
    mult = 1j * k
    mult[-1] = 0.0  # Nyquist mode of an odd derivative
    coef = sfft.rfft(a, axis=ax)
    coef *= mult.reshape(shape)
    return sfft.irfft(coef, n=n, axis=ax)


def gradient(a: np.ndarray, grid: ChartGrid) -> np.ndarray:
    """Stack of all partial derivatives; the new index is placed first."""
    out = np.empty((grid.dim,) + a.shape)
    for ax in range(grid.dim):
        out[ax] = diff(a, ax, grid)
    return out


def flat_laplacian_symbol(grid: ChartGrid) -> np.ndarray:
    """|k|^2 on the rfftn layout (last axis halved), used by FFT-diagonal solves."""
    ks = []
    for axis in range(grid.dim):
        n = grid.sizes[axis]
        if axis == grid.dim - 1:
            k = _wavenumbers(grid, axis)
        else:
            k = TWO_PI / grid.period[axis] * np.fft.fftfreq(n, 1.0 / n)
        shape = [1] * grid.dim
        shape[axis] = k.size
        ks.append((k ** 2).reshape(shape))
    return sum(ks)


def grid_laplacian_symbol(grid: ChartGrid) -> np.ndarray:
    """Symbol of Σ_a ∂_a∂_a built from the grid's spectral first derivative.

    The first derivative zeroes the Nyquist wavenumber of its axis, so the
    composite vanishes on every mode whose wavenumbers all lie in {0, N/2}.
    """
    ks = []
    for axis in range(grid.dim):
        n = grid.sizes[axis]
        if axis == grid.dim - 1:
            k = _wavenumbers(grid, axis).copy()
            k[-1] = 0.0
        else:
            k = TWO_PI / grid.period[axis] * np.fft.fftfreq(n, 1.0 / n)
            k[n // 2] = 0.0
        shape = [1] * grid.dim
        shape[axis] = k.size
        ks.append((k ** 2).reshape(shape))
    return sum(ks)


def apply_fourier_multiplier(a: np.ndarray, symbol: np.ndarray, grid: ChartGrid) -> np.ndarray:
    axes = tuple(range(a.ndim - grid.dim, a.ndim))
    coef = sfft.rfftn(a, axes=axes)
    coef *= symbol
    return sfft.irfftn(coef, s=grid.shape, axes=axes)


# ---------------------------------------------------------------------------
# tensor fields

@dataclass(frozen=True, eq=False)
class TensorField:
    grid: ChartGrid
    variance: tuple[str, ...]
    data: np.ndarray
    symmetries: tuple[tuple[str, int, int], ...] = ()

    def __post_init__(self):
        variance = tuple(self.variance)
        for v in variance:
            if v not in (COVARIANT, CONTRAVARIANT):
                raise ValueError(f"bad variance tag {v!r}")
        object.__setattr__(self, "variance", variance)
        expected = (self.grid.dim,) * len(variance) + self.grid.shape
        data = np.asarray(self.data, dtype=float)
        if data.shape != expected:
            raise ValueError(f"component array has shape {data.shape}, expected {expected}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def rank(self) -> int:
        return len(self.variance)

    @classmethod
    def scalar(cls, grid: ChartGrid, values) -> "TensorField":
        return cls(grid, (), np.broadcast_to(np.asarray(values, dtype=float), grid.shape).copy())

    def symmetry_violation(self) -> float:
        """Largest violation of the declared symmetries relative to max|component|."""
        scale = float(np.max(np.abs(self.data))) if self.data.size else 0.0
        if scale == 0.0:
            return 0.0
        worst = 0.0
        for kind, i, j in self.symmetries:
            swapped = np.swapaxes(self.data, i, j)
            resid = self.data - swapped if kind == "sym" else self.data + swapped
            worst = max(worst, float(np.max(np.abs(resid))))
        return worst / scale

    def point_major(self) -> np.ndarray:
        """Flattened data with the grid point as the slow index."""
        r = self.rank
        moved = np.moveaxis(self.data, tuple(range(r)), tuple(range(self.data.ndim - r, self.data.ndim)))
        return moved.reshape(-1)

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "variance": list(self.variance),
            "data": self.point_major().tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict, method: str = "spectral") -> "TensorField":
        g = obj["grid"]
        grid = ChartGrid(int(g["dim"]), tuple(g["sizes"]), tuple(g["period"]), method)
        variance = tuple(obj["variance"])
        r = len(variance)
        flat = np.asarray(obj["data"], dtype=float)
        pm = flat.reshape(grid.shape + (grid.dim,) * r)
        data = np.moveaxis(pm, tuple(range(grid.dim, grid.dim + r)), tuple(range(r)))
        return cls(grid, variance, np.ascontiguousarray(data))


def dumps_field(f: TensorField) -> str:
    return json.dumps(f.to_json())


def loads_field(text: str, method: str = "spectral") -> TensorField:
    return TensorField.from_json(json.loads(text), method)


def partial_derivative(f: TensorField, axis: int) -> TensorField:
    if not 0 <= axis < f.grid.dim:
        raise ValueError(f"axis {axis} out of range for dim {f.grid.dim}")
    return TensorField(f.grid, f.variance, diff(f.data, axis, f.grid))


# ---------------------------------------------------------------------------
# metrics

class Metric:
    """Symmetric positive-definite (0,2) field with cached inverse, volume density and frame."""

    def __init__(self, grid: ChartGrid, components: np.ndarray):
        comps = np.asarray(components, dtype=float)
        comps = 0.5 * (comps + np.swapaxes(comps, 0, 1))
        self.value = TensorField(grid, (COVARIANT, COVARIANT), comps, (("sym", 0, 1),))
        n = grid.dim
        stacked = comps.reshape(n, n, -1).transpose(2, 0, 1)
        chol, inv, sqrtdet, frame = _accel.spd_factor(stacked)
        back = lambda m: np.ascontiguousarray(m.transpose(1, 2, 0).reshape((n, n) + grid.shape))
        self._inverse = back(inv)
        self._inverse.setflags(write=False)
        self._frame = back(frame)
        self._frame.setflags(write=False)
        self._sqrt_det = sqrtdet.reshape(grid.shape)
        self._sqrt_det.setflags(write=False)
        self._cache: dict = {}

    @property
    def grid(self) -> ChartGrid:
        return self.value.grid

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def g(self) -> np.ndarray:
        return self.value.data

    @property
    def inverse_array(self) -> np.ndarray:
        return self._inverse

    @property
    def inverse(self) -> TensorField:
        return TensorField(self.grid, (CONTRAVARIANT, CONTRAVARIANT), self._inverse, (("sym", 0, 1),))

    @property
    def volume_density(self) -> np.ndarray:
        return self._sqrt_det

    @property
    def frame(self) -> np.ndarray:
        """``frame[i, a]``: coordinate components of the i-th g-orthonormal vector."""
        return self._frame

    def identity_residual(self) -> float:
        prod = np.einsum("ij...,jk...->ik...", self.g, self._inverse)
        eye = np.eye(self.dim).reshape((self.dim, self.dim) + (1,) * self.dim)
        return float(np.max(np.abs(prod - eye)))

    def cached(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]


def make_flat_torus(dim: int, sizes: Sequence[int], period=None, method: str = "spectral"):
    grid = ChartGrid(dim, tuple(sizes), None if period is None else tuple(period), method)
    eye = np.eye(dim).reshape((dim, dim) + (1,) * dim)
    return grid, Metric(grid, np.broadcast_to(eye, (dim, dim) + grid.shape).copy())


def metric_from_array(grid: ChartGrid, components: np.ndarray) -> Metric:
    return Metric(grid, components)


def _as_array(f, grid: ChartGrid) -> np.ndarray:
    if isinstance(f, TensorField):
        if f.grid != grid:
            raise ValueError("field and metric live on different grids")
        return f.data
    return np.broadcast_to(np.asarray(f, dtype=float), grid.shape)


def integrate(f, g: Metric) -> float:
    """Trapezoid rule on the periodic grid: sum f sqrt(det g) times the cell volume."""
    arr = _as_array(f, g.grid)
    return float(np.sum(arr * g.volume_density) * g.grid.cell_volume)


def total_volume(g: Metric) -> float:
    return integrate(1.0, g)


def conformal_metric(g: Metric, omega) -> Metric:
    """The metric exp(2 omega) g."""
    w = _as_array(omega, g.grid)
    if np.max(np.abs(w)) > 300:
        raise OverflowError("conformal factor |omega| > 300 would overflow")
    return Metric(g.grid, np.exp(2.0 * w) * g.g)


def l2_norm(a: np.ndarray, g: Metric, inner=None) -> float:
    """L2(dvol_g) norm of a field; ``inner`` maps the array to its pointwise squared norm."""
    sq = a * a if inner is None else inner(a)
    while sq.ndim > g.dim:
        sq = sq.sum(axis=0)
    return math.sqrt(max(integrate(sq, g), 0.0))
