"""Frequency-domain acoustic operator on a regular grid.

The operator is ``A(m) = Lap + omega^2 * diag(c * m)`` where ``Lap`` is the
5-point Laplacian under complex coordinate stretching (perfectly matched
layers occupying the outer ``n_pml`` cells of the grid on every side) and
``c`` is the complex stretch product, equal to 1 outside the layers. The
stretched equation is assembled in its symmetric form, i.e. multiplied
through by the stretch product, so the matrix equals its own transpose
entry for entry and ``A`` is exactly linear in ``m``.

Because the mass term is diagonal, the derivative of ``A(m)u`` with respect
to ``m`` is the diagonal matrix ``diag(omega^2 * c * u)``; the exact
identity ``A(m)u = Lap u + diag(omega^2 c u) m`` holds with no
linearization error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .model import Grid, Model

# dimensionless amplitude of the default peak-damping heuristic
# sigma_max = PML_STRENGTH * v_max / L_pml
PML_STRENGTH = 90.0


@dataclass(frozen=True)
class PmlProfile:
    """Absorbing-layer description: thickness in cells, peak damping (1/s),
    and the power of the ramp profile."""

    n_pml: int = 10
    sigma_max: float | None = None  # None: resolve from v_max at assembly
    exponent: float = 2.0

    def __post_init__(self):
        if self.n_pml < 0:
            raise ValidationError("n_pml must be >= 0")
        if self.sigma_max is not None and self.sigma_max < 0:
            raise ValidationError("sigma_max must be >= 0")
        if self.exponent < 1:
            raise ValidationError("profile exponent must be >= 1")

    def resolve_sigma_max(self, grid: Grid, v_max: float) -> float:
        """Peak damping, defaulting to PML_STRENGTH * v_max / layer thickness."""
        if self.sigma_max is not None:
            return self.sigma_max
        if self.n_pml == 0:
            return 0.0
        width = self.n_pml * min(grid.dz, grid.dx)
        return PML_STRENGTH * v_max / width


def _stretch_profiles(
    n: int, spacing: float, n_pml: int, sigma_max: float, exponent: float, omega: float
) -> tuple[np.ndarray, np.ndarray]:
    """Complex stretch s = 1 + i*sigma/omega at the n nodes and the n+1
    cell interfaces (including the ghost interfaces outside both ends)."""

    def sigma_at(pos: np.ndarray) -> np.ndarray:
        # pos in node units; damping depth measured from the inner PML edge
        d_lo = (n_pml - pos) * spacing
        d_hi = (pos - (n - 1 - n_pml)) * spacing
        d = np.maximum(np.maximum(d_lo, d_hi), 0.0)
        if n_pml == 0:
            return np.zeros_like(d)
        return sigma_max * (d / (n_pml * spacing)) ** exponent

    nodes = sigma_at(np.arange(n, dtype=float))
    halves = sigma_at(np.arange(n + 1, dtype=float) - 0.5)
    return 1.0 + 1j * nodes / omega, 1.0 + 1j * halves / omega


def assemble_laplacian(
    grid: Grid, omega: float, pml: PmlProfile, sigma_max: float | None = None
) -> sp.csc_matrix:
    """Stretched 5-point Laplacian (complex symmetric, Dirichlet edges).

    ``sigma_max`` overrides the profile's value; one of the two must be set
    unless ``n_pml`` is zero.
    """
    if omega <= 0:
        raise ValidationError("angular frequency must be > 0")
    if 2 * pml.n_pml >= grid.nz or 2 * pml.n_pml >= grid.nx:
        raise ValidationError(
            f"PML of {pml.n_pml} cells per side does not fit a "
            f"{grid.nz}x{grid.nx} grid"
        )
    if sigma_max is None:
        sigma_max = pml.sigma_max
    if sigma_max is None:
        if pml.n_pml == 0:
            sigma_max = 0.0
        else:
            raise ValidationError("sigma_max unresolved; pass it or set it on the profile")

    nz, nx = grid.nz, grid.nx
    sz, szh = _stretch_profiles(nz, grid.dz, pml.n_pml, sigma_max, pml.exponent, omega)
    sx, sxh = _stretch_profiles(nx, grid.dx, pml.n_pml, sigma_max, pml.exponent, omega)

    # interface coefficients of the symmetric form:
    # vertical:   s_x(ix) / s_z(half), shape (nz+1, nx)
    # horizontal: s_z(iz) / s_x(half), shape (nz, nx+1)
    alpha = (sx[None, :] / szh[:, None]) / grid.dz**2
    beta = (sz[:, None] / sxh[None, :]) / grid.dx**2

    idx = np.arange(nz * nx).reshape((nz, nx), order="F")

    diag = -(alpha[:-1, :] + alpha[1:, :]) - (beta[:, :-1] + beta[:, 1:])

    # vertical couplings between (iz, ix) and (iz+1, ix): alpha at interior halves
    v_val = alpha[1:-1, :].reshape(-1, order="F")
    v_lo = idx[:-1, :].reshape(-1, order="F")
    v_hi = idx[1:, :].reshape(-1, order="F")
    # horizontal couplings between (iz, ix) and (iz, ix+1)
    h_val = beta[:, 1:-1].reshape(-1, order="F")
    h_lo = idx[:, :-1].reshape(-1, order="F")
    h_hi = idx[:, 1:].reshape(-1, order="F")

    rows = np.concatenate([idx.reshape(-1, order="F"), v_lo, v_hi, h_lo, h_hi])
    cols = np.concatenate([idx.reshape(-1, order="F"), v_hi, v_lo, h_hi, h_lo])
    vals = np.concatenate([diag.reshape(-1, order="F"), v_val, v_val, h_val, h_val])
    lap = sp.coo_matrix((vals, (rows, cols)), shape=(grid.n, grid.n)).tocsc()
    lap.sum_duplicates()
    return lap


@dataclass(frozen=True)
class HelmholtzOperator:
    """Immutable assembly of the stretched Laplacian and mass weights for one
    (grid, frequency, PML) combination."""

    grid: Grid
    omega: float
    pml: PmlProfile
    laplacian: sp.csc_matrix
    mass_weights: np.ndarray  # omega^2 * stretch product, length N

    @staticmethod
    def build(
        grid: Grid, freq_hz: float, pml: PmlProfile, v_max: float
    ) -> "HelmholtzOperator":
        """Assemble for a temporal frequency in Hz; ``v_max`` feeds the
        default peak-damping heuristic."""
        omega = 2.0 * np.pi * freq_hz
        sigma_max = pml.resolve_sigma_max(grid, v_max)
        lap = assemble_laplacian(grid, omega, pml, sigma_max=sigma_max)
        sz, _ = _stretch_profiles(grid.nz, grid.dz, pml.n_pml, sigma_max, pml.exponent, omega)
        sx, _ = _stretch_profiles(grid.nx, grid.dx, pml.n_pml, sigma_max, pml.exponent, omega)
        mass = omega**2 * (sx[None, :] * sz[:, None]).reshape(-1, order="F")
        return HelmholtzOperator(grid, omega, pml, lap, mass)


def assemble_A(op: HelmholtzOperator, m: Model) -> sp.csc_matrix:
    """Full operator for a model: Laplacian plus the diagonal mass term."""
    if m.grid != op.grid:
        raise ValidationError("model grid does not match operator grid")
    return assemble_A_values(op, m.values)


def assemble_A_values(op: HelmholtzOperator, values: np.ndarray) -> sp.csc_matrix:
    """Same as assemble_A but on a raw coefficient vector (may be zero)."""
    return (op.laplacian + sp.diags(op.mass_weights * values)).tocsc()


def model_jacobian_diag(op: HelmholtzOperator, u: np.ndarray) -> np.ndarray:
    """Diagonal of d[A(m)u]/dm, i.e. omega^2 * stretch * u."""
    return op.mass_weights * u


def model_jacobian(op: HelmholtzOperator, u: np.ndarray) -> sp.dia_matrix:
    """d[A(m)u]/dm as a sparse diagonal matrix."""
    return sp.diags(model_jacobian_diag(op, u))
