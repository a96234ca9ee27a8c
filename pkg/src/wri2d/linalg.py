"""Sparse factorizations and the two normal-equation solves of the
inversion, plus power iteration for the data-space spectral constant.

The direct backend is SuperLU. Normal matrices (Hermitian or real SPD)
are factored in symmetric mode with a relaxed pivot threshold, which
roughly halves factorization time on the 5-point-pattern systems this
package produces. A conjugate-gradient backend is available as a
fallback for the normal solves, selected per call.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import FactorizationError, NumericalError

_SYMMETRIC_OPTS = {
    "ColPerm": "MMD_AT_PLUS_A",
    "SymmetricMode": True,
    "DiagPivotThresh": 0.001,
}

CG_RTOL = 1e-10
CG_MAXITER_PER_N = 10


class Factorization:
    """Reusable LU decomposition of a square sparse matrix.

    Immutable after construction; solves may be issued from any thread.
    ``trans`` follows SuperLU: 'N' solves M x = b, 'T' the transpose,
    'H' the conjugate transpose.
    """

    def __init__(self, matrix: sp.spmatrix, symmetric: bool = False):
        m = matrix.tocsc()
        if m.shape[0] != m.shape[1]:
            raise NumericalError(f"matrix must be square, got {m.shape}")
        self.n = m.shape[0]
        opts = _SYMMETRIC_OPTS if symmetric else {}
        try:
            self._lu = spla.splu(m, options=opts)
        except RuntimeError as exc:
            raise FactorizationError(
                f"sparse factorization failed: {exc}", pivot=_pivot_from_message(exc)
            ) from exc

    def solve(self, b: np.ndarray, trans: str = "N") -> np.ndarray:
        x = self._lu.solve(np.asarray(b), trans=trans)
        if not np.all(np.isfinite(x)):
            raise FactorizationError("factorization produced non-finite solution")
        return x


def _pivot_from_message(exc: RuntimeError) -> int | None:
    # SuperLU sometimes reports "... at position <i>"; best effort only
    for tok in str(exc).replace(")", " ").split():
        if tok.isdigit():
            return int(tok)
    return None


def factor(matrix: sp.spmatrix, symmetric: bool = False) -> Factorization:
    """Factor a square sparse (real or complex) matrix for repeated solves."""
    return Factorization(matrix, symmetric=symmetric)


def dump_matrix(matrix: sp.spmatrix, path) -> None:
    """Debug dump: one 'row col re im' line per stored entry, 17 significant
    digits, coordinate order."""
    coo = matrix.tocoo()
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            z = complex(v)
            fh.write(f"{r} {c} {z.real:.17g} {z.imag:.17g}\n")


def scatter_adjoint(idx: np.ndarray, values: np.ndarray, n: int) -> np.ndarray:
    """Apply the transpose of the sampling operator: accumulate receiver
    values onto their grid nodes (duplicates add)."""
    out = np.zeros(n, dtype=values.dtype)
    np.add.at(out, idx, values)
    return out


def sampling_gram_diagonal(idx: np.ndarray, n: int) -> np.ndarray:
    """Diagonal of P^T P: per-node receiver multiplicity."""
    d = np.zeros(n)
    np.add.at(d, idx, 1.0)
    return d


def _cg(matrix: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    x, info = spla.cg(matrix, b, rtol=CG_RTOL, atol=0.0,
                      maxiter=CG_MAXITER_PER_N * matrix.shape[0])
    if info != 0:
        raise NumericalError(f"conjugate gradients did not converge (info={info})")
    return x


class WavefieldNormal:
    """Factored normal system of the joint data/wave-equation fit.

    Prepares ``lambda0 P^T P + lambda1 A^H A`` once so that many right-hand
    sides (one per source) can be solved against the same operator.
    """

    def __init__(
        self,
        A: sp.spmatrix,
        receiver_idx: np.ndarray,
        lambda0: float,
        lambda1: float,
        backend: str = "direct",
    ):
        if lambda0 <= 0 or lambda1 <= 0:
            raise NumericalError("penalty weights must be > 0")
        self.A = A.tocsc()
        self.idx = np.asarray(receiver_idx, dtype=int)
        self.lambda0 = lambda0
        self.lambda1 = lambda1
        self.backend = backend
        n = self.A.shape[0]
        gram_p = sp.diags(sampling_gram_diagonal(self.idx, n))
        self.normal = (lambda0 * gram_p + lambda1 * (self.A.conj().T @ self.A)).tocsc()
        self._fact = factor(self.normal, symmetric=True) if backend == "direct" else None

    def rhs(self, rhs_data: np.ndarray, rhs_src: np.ndarray) -> np.ndarray:
        n = self.A.shape[0]
        out = self.lambda0 * scatter_adjoint(self.idx, np.asarray(rhs_data, complex), n)
        out += self.lambda1 * (self.A.conj().T @ np.asarray(rhs_src, complex))
        return out

    def solve(self, rhs_data: np.ndarray, rhs_src: np.ndarray) -> np.ndarray:
        b = self.rhs(rhs_data, rhs_src)
        if self._fact is not None:
            return self._fact.solve(b)
        return _cg(self.normal, b)


def solve_wavefield_normal(
    A: sp.spmatrix,
    receiver_idx: np.ndarray,
    lambda0: float,
    lambda1: float,
    rhs_data: np.ndarray,
    rhs_src: np.ndarray,
    backend: str = "direct",
) -> np.ndarray:
    """One-shot minimizer of lambda0 ||Pu - rhs_data||^2 + lambda1 ||Au - rhs_src||^2."""
    return WavefieldNormal(A, receiver_idx, lambda0, lambda1, backend).solve(
        rhs_data, rhs_src
    )


def solve_model_normal(H: sp.spmatrix, g: np.ndarray, backend: str = "direct") -> np.ndarray:
    """Solve the real SPD model system H x = g."""
    if backend == "cg":
        return _cg(H.tocsc(), np.asarray(g, dtype=float))
    return factor(H, symmetric=True).solve(np.asarray(g, dtype=float))


def power_iteration_xi(
    A_fact: Factorization, receiver_idx: np.ndarray, iters: int = 30, seed: int = 0
) -> float:
    """Largest eigenvalue of the data-space operator A^-H P^T P A^-1,
    estimated by power iteration from a seeded random start.

    The Rayleigh quotient of a Hermitian PSD operator is nondecreasing
    along power iterates, so more iterations can only sharpen the estimate.
    """
    if iters < 1:
        raise NumericalError("power iteration needs iters >= 1")
    idx = np.asarray(receiver_idx, dtype=int)
    n = A_fact.n
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    rho = 0.0
    for _ in range(iters):
        y = A_fact.solve(x, trans="N")
        w = scatter_adjoint(idx, y[idx], n)
        gx = A_fact.solve(w, trans="H")
        rho = float(np.real(np.vdot(x, gx)))
        norm = np.linalg.norm(gx)
        if norm == 0.0:
            return 0.0
        x = gx / norm
    return rho
