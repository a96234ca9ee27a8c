"""Discrete gradients, box projection, isotropic-TV shrinkage, and the
split-variable bookkeeping used by the regularized model update.

All fields are flat vectors of length nz*nx, stored depth-fastest
(index = iz + ix*nz). Differences are forward, unit-spacing (no 1/h
factor), with the last plane along each axis set to zero, so the Gram
matrix of the stacked operator is the standard 5-point graph Laplacian.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp


def _forward_diff_1d(n: int) -> sp.csr_matrix:
    # unit-spacing forward difference, zero last row (Neumann closure)
    main = -np.ones(n)
    main[-1] = 0.0
    upper = np.ones(n - 1)
    return sp.diags([main, upper], [0, 1], format="csr")


class DiffOps:
    """Forward-difference operators for one grid shape, plus their Gram matrix."""

    def __init__(self, nz: int, nx: int):
        self.nz = nz
        self.nx = nx
        iz = sp.identity(nz, format="csr")
        ix = sp.identity(nx, format="csr")
        # depth-fastest flattening: lateral derivative couples blocks of size nz
        self.d_x = sp.kron(_forward_diff_1d(nx), iz, format="csr")
        self.d_z = sp.kron(ix, _forward_diff_1d(nz), format="csr")
        self.gram = (self.d_x.T @ self.d_x + self.d_z.T @ self.d_z).tocsr()


@lru_cache(maxsize=8)
def diff_ops(nz: int, nx: int) -> DiffOps:
    return DiffOps(nz, nx)


def grad_x(values: np.ndarray, nz: int, nx: int) -> np.ndarray:
    """Forward difference along the lateral axis."""
    return diff_ops(nz, nx).d_x @ values


def grad_z(values: np.ndarray, nz: int, nx: int) -> np.ndarray:
    """Forward difference along the depth axis."""
    return diff_ops(nz, nx).d_z @ values


def isotropic_tv(values: np.ndarray, nz: int, nx: int) -> float:
    """Sum over cells of the Euclidean magnitude of the discrete gradient."""
    ops = diff_ops(nz, nx)
    return float(np.hypot(ops.d_x @ values, ops.d_z @ values).sum())


def project_box(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Elementwise clamp onto [lower, upper]; idempotent."""
    return np.clip(x, lower, upper)


def prox_isotropic_tv(
    zx: np.ndarray, zz: np.ndarray, gamma: float
) -> tuple[np.ndarray, np.ndarray]:
    """Vector soft thresholding of the per-cell gradient pair.

    Each cell's (zx, zz) pair is shrunk toward zero by ``gamma`` along its
    own direction; cells with magnitude <= gamma map to (0, 0). A zero
    magnitude maps to zero (the 0/0 limit of the shrinkage formula).
    """
    if gamma < 0:
        raise ValueError("shrinkage threshold must be >= 0")
    r = np.hypot(zx, zz)
    shrink = np.maximum(r - gamma, 0.0)
    scale = shrink / np.where(r > 0.0, r, 1.0)
    return zx * scale, zz * scale


@dataclass(frozen=True)
class SplitWeights:
    """Penalty weights of the splitting: ``box`` for bounds, ``tv`` shared by
    both gradient components."""

    box: float
    tv: float

    def __post_init__(self):
        if self.box < 0 or self.tv < 0:
            raise ValueError("splitting weights must be >= 0")


@dataclass(frozen=True)
class SplitState:
    """Auxiliary variables and scaled duals of the bounds+TV splitting.

    ``box`` is the bound-respecting copy of the model; ``tv_x``/``tv_z``
    carry the shrunk gradient fields. Each auxiliary has a scaled dual
    accumulating its splitting residual. ``nz``/``nx`` record the grid
    shape so the difference operators can be recovered.
    """

    nz: int
    nx: int
    box: np.ndarray
    tv_x: np.ndarray
    tv_z: np.ndarray
    dual_box: np.ndarray
    dual_x: np.ndarray
    dual_z: np.ndarray

    @staticmethod
    def initial(
        m0: np.ndarray,
        nz: int,
        nx: int,
        lower: np.ndarray | None = None,
        upper: np.ndarray | None = None,
    ) -> "SplitState":
        """Warm start: auxiliaries consistent with the starting model, duals zero."""
        ops = diff_ops(nz, nx)
        box = m0.copy() if lower is None else project_box(m0, lower, upper)
        return SplitState(
            nz=nz,
            nx=nx,
            box=box,
            tv_x=ops.d_x @ m0,
            tv_z=ops.d_z @ m0,
            dual_box=np.zeros_like(m0),
            dual_x=np.zeros_like(m0),
            dual_z=np.zeros_like(m0),
        )


def update_aux(
    m_new: np.ndarray,
    state: SplitState,
    lower: np.ndarray,
    upper: np.ndarray,
    weights: SplitWeights,
) -> SplitState:
    """Refresh the auxiliary variables for an updated model; duals untouched.

    The box copy is the projection of ``m_new - dual_box``; the TV pair is
    the isotropic shrinkage of the dual-corrected gradients.
    """
    ops = diff_ops(state.nz, state.nx)
    box = project_box(m_new - state.dual_box, lower, upper)
    tv_x, tv_z = prox_isotropic_tv(
        ops.d_x @ m_new - state.dual_x,
        ops.d_z @ m_new - state.dual_z,
        weights.tv,
    )
    return replace(state, box=box, tv_x=tv_x, tv_z=tv_z)


def update_aux_duals(state: SplitState, m_new: np.ndarray, weight: float) -> SplitState:
    """Half-step the scaled duals by ``weight`` times the splitting residual."""
    if not 0.0 < weight <= 1.0:
        raise ValueError("dual step weight must lie in (0, 1]")
    ops = diff_ops(state.nz, state.nx)
    return replace(
        state,
        dual_box=state.dual_box + weight * (state.box - m_new),
        dual_x=state.dual_x + weight * (state.tv_x - ops.d_x @ m_new),
        dual_z=state.dual_z + weight * (state.tv_z - ops.d_z @ m_new),
    )
