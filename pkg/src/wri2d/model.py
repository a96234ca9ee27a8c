"""Regular-grid geometry, squared-slowness models, bound sets, and the
synthetic model builders used by the desk-scale experiments.

Conventions fixed here and relied on everywhere else:

* flat storage is depth-fastest (column-major over a (nz, nx) array),
  index = iz + ix*nz;
* node (iz, ix) sits at physical coordinates (z, x) = (iz*dz, ix*dx);
* the inversion parameter is squared slowness in s^2/m^2, but model files
  and builders speak velocity (m/s) because that is what humans read.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from . import tv
from .errors import ValidationError


@dataclass(frozen=True)
class Grid:
    """Regular 2D grid: nz depth samples spaced dz, nx lateral samples spaced dx."""

    nz: int
    nx: int
    dz: float
    dx: float

    def __post_init__(self):
        if self.nz < 3 or self.nx < 3:
            raise ValidationError(f"grid must be at least 3x3, got {self.nz}x{self.nx}")
        if self.dz <= 0 or self.dx <= 0:
            raise ValidationError("grid spacings must be > 0")

    @property
    def n(self) -> int:
        return self.nz * self.nx

    @property
    def depth(self) -> float:
        return (self.nz - 1) * self.dz

    @property
    def width(self) -> float:
        return (self.nx - 1) * self.dx

    def as_2d(self, values: np.ndarray) -> np.ndarray:
        """View a flat depth-fastest vector as a (nz, nx) array."""
        return np.asarray(values).reshape((self.nz, self.nx), order="F")

    def flatten(self, arr: np.ndarray) -> np.ndarray:
        """Flatten a (nz, nx) array depth-fastest."""
        return np.asarray(arr).reshape(self.n, order="F")

    def nearest_index_1d(self, coord: float, spacing: float, count: int) -> int:
        """Nearest node along one axis; exact midpoints round to the lower node."""
        i = int(np.ceil(coord / spacing - 0.5))
        if i < 0 or i >= count:
            raise ValidationError(
                f"coordinate {coord} outside grid extent [0, {(count - 1) * spacing}]"
            )
        return i

    def node_index(self, x: float, z: float) -> int:
        """Flat index of the grid node nearest to physical position (x, z)."""
        iz = self.nearest_index_1d(z, self.dz, self.nz)
        ix = self.nearest_index_1d(x, self.dx, self.nx)
        return iz + ix * self.nz


@dataclass(frozen=True)
class Model:
    """Squared-slowness field on a grid.

    The constructor enforces physical values (finite, positive). Solver
    outputs go through :meth:`raw` instead: an unregularized estimate may
    legitimately leave the physical range in poorly illuminated cells,
    and the user should be able to inspect it.
    """

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = self._checked_shape(self.grid, self.values)
        if np.any(v <= 0):
            raise ValidationError("squared slowness must be finite and > 0")
        object.__setattr__(self, "values", v)

    @staticmethod
    def _checked_shape(grid: Grid, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        if v.shape != (grid.n,):
            raise ValidationError(f"model needs {grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("squared slowness must be finite")
        return v

    @classmethod
    def raw(cls, grid: Grid, values) -> "Model":
        """Construct without the positivity check (solver outputs only)."""
        m = object.__new__(cls)
        object.__setattr__(m, "grid", grid)
        object.__setattr__(m, "values", cls._checked_shape(grid, values))
        return m


@dataclass(frozen=True)
class Bounds:
    """Elementwise squared-slowness box [lower, upper]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != hi.shape:
            raise ValidationError("bound vectors must have matching shapes")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("bounds must be finite")
        if np.any(lo <= 0) or np.any(lo > hi):
            raise ValidationError("bounds must satisfy 0 < lower <= upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @staticmethod
    def from_velocity(grid: Grid, v_min: float, v_max: float) -> "Bounds":
        """Constant bounds from a velocity range (note the inversion of order)."""
        if not 0 < v_min <= v_max:
            raise ValidationError("need 0 < v_min <= v_max")
        n = grid.n
        return Bounds(np.full(n, 1.0 / v_max**2), np.full(n, 1.0 / v_min**2))

    @staticmethod
    def from_model(m: Model) -> "Bounds":
        """Tightest constant bounds containing a reference model."""
        n = m.grid.n
        return Bounds(np.full(n, m.values.min()), np.full(n, m.values.max()))


def velocity_to_slowness2(grid: Grid, velocity: np.ndarray) -> Model:
    """Convert a velocity field (m/s) to a squared-slowness model."""
    v = np.asarray(velocity, dtype=float).reshape(-1)
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValidationError("velocities must be finite and > 0")
    return Model(grid, 1.0 / v**2)


def slowness2_to_velocity(m: Model) -> np.ndarray:
    """Velocity field (m/s) of a squared-slowness model."""
    return 1.0 / np.sqrt(m.values)


def make_inclusion_model(grid: Grid) -> tuple[Model, Model, Model]:
    """Build the box-anomaly benchmark: truth, gradient start, homogeneous start.

    The background velocity ramps linearly with depth from 1500 to 3500 m/s.
    A 5000 m/s rectangular inclusion covering 0.2/1.5 of the width and
    0.3/1.0 of the depth is centered in the domain (the canonical grid is
    151x101 at 10 m spacing; other grids are treated as proportional
    rescales). The gradient start is the background without the box; the
    homogeneous start is uniform 2200 m/s.
    """
    lx, lz = grid.width, grid.depth
    z = np.arange(grid.nz) * grid.dz
    background = 1500.0 + (3500.0 - 1500.0) * (z / lz)
    v_bg = np.tile(background[:, None], (1, grid.nx))

    half_w = 0.5 * lx * (0.2 / 1.5)
    half_d = 0.5 * lz * (0.3 / 1.0)
    cx, cz = 0.5 * lx, 0.5 * lz
    ix0 = grid.nearest_index_1d(cx - half_w, grid.dx, grid.nx)
    ix1 = grid.nearest_index_1d(cx + half_w, grid.dx, grid.nx)
    iz0 = grid.nearest_index_1d(cz - half_d, grid.dz, grid.nz)
    iz1 = grid.nearest_index_1d(cz + half_d, grid.dz, grid.nz)
    if ix1 <= ix0 or iz1 <= iz0 or ix0 <= 0 or iz0 <= 0 \
            or ix1 >= grid.nx - 1 or iz1 >= grid.nz - 1:
        raise ValidationError("grid too small to contain the inclusion box")

    v_true = v_bg.copy()
    v_true[iz0 : iz1 + 1, ix0 : ix1 + 1] = 5000.0

    truth = velocity_to_slowness2(grid, grid.flatten(v_true))
    gradient_start = velocity_to_slowness2(grid, grid.flatten(v_bg))
    homogeneous_start = velocity_to_slowness2(grid, np.full(grid.n, 2200.0))
    return truth, gradient_start, homogeneous_start


def smooth_model(m: Model, radius: float) -> Model:
    """Gaussian-smooth the velocity field (std dev = radius, in meters,
    reflected boundaries) and convert back to squared slowness."""
    if radius < 0:
        raise ValidationError("smoothing radius must be >= 0")
    if radius == 0:
        return m
    v = m.grid.as_2d(slowness2_to_velocity(m))
    sig = (radius / m.grid.dz, radius / m.grid.dx)
    v_smooth = gaussian_filter(v, sigma=sig, mode="reflect")
    return velocity_to_slowness2(m.grid, m.grid.flatten(v_smooth))


def tv_norm(m: Model) -> float:
    """Isotropic TV of the squared-slowness field (unit-spacing differences)."""
    return tv.isotropic_tv(m.values, m.grid.nz, m.grid.nx)
