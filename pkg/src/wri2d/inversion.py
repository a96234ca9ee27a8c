"""The outer inversion loop: joint wavefield reconstruction, running
right-hand-side refinement, and bounds+TV-regularized model estimation.

One outer iteration performs, in order:

1. wavefield solve per (frequency, source) against the current model,
   fitting data and wave equation jointly (weights lambda0=1, lambda1);
2. first half-step of the data/source duals (relaxation alpha), skipped
   in plain penalty mode;
3. model solve from the linearized wave equation stacked over all
   gathers, with the splitting penalty pulling toward the auxiliary
   variables;
4. half-step of the splitting duals, refresh of the auxiliary variables
   (box projection + TV shrinkage), second half-step;
5. second half-step of the data/source duals using the updated model.

Exactly one model update runs per outer iteration. The penalty weights
are data-driven: lambda1 is a configured fraction of the spectral
constant of the data-space normal operator (refreshed per frequency
batch), and the splitting weights are configured multiples of the mean
diagonal of the stacked squared wave-equation Jacobian (refreshed every
iteration).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import linalg, tv
from .errors import NumericalError, ValidationError
from .helmholtz import HelmholtzOperator, assemble_A_values, model_jacobian_diag
from .model import Bounds, Grid, Model
from .schedule import BatchSchedule, gamma_schedule, stopping_check
from .survey import DataSet, Survey, build_sources, sampling_indices

MODE_PENALTY = "wri"       # right-hand sides fixed: plain penalty method
MODE_REFINED = "irwri"     # running-sum right-hand-side refinement active


@dataclass(frozen=True)
class PenaltyConfig:
    """Weights and schedules of the two nested splittings.

    ``lambda_frac`` scales the wave-equation weight relative to the
    spectral constant xi. ``gamma_init``/``gamma0_init`` are the TV and
    bounds weights divided by lambda1, in units of the Jacobian diagonal
    mean zeta; they decay by ``gamma_decay_factor`` every
    ``gamma_decay_every`` iterations down to ``gamma_floor``.
    ``damping_frac`` (units of zeta) stabilizes the model system where
    the wavefields are weak. ``grad_frac`` drives the alternative
    shrinkage policy: gamma as a fraction of the largest dual-corrected
    gradient magnitude.
    """

    lambda_frac: float = 1e-5
    alpha: float = 0.5
    gamma_init: float = 0.01
    gamma0_init: float | None = None
    gamma_floor: float = 0.01
    gamma_decay_every: int = 10
    gamma_decay_factor: float = 1.0
    damping_frac: float = 0.0
    gamma_policy: str = "zeta"
    grad_frac: float = 0.02
    bounds_start_iter: int = 0
    xi_power_iters: int = 30

    def __post_init__(self):
        if self.lambda_frac <= 0:
            raise ValidationError("lambda_frac must be > 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie in (0, 1)")
        if self.gamma_decay_factor < 1.0:
            raise ValidationError("gamma_decay_factor must be >= 1")
        if self.gamma_decay_every < 1:
            raise ValidationError("gamma_decay_every must be >= 1")
        if self.gamma_policy not in ("zeta", "grad_frac"):
            raise ValidationError(f"unknown gamma policy {self.gamma_policy!r}")
        if min(self.gamma_init, self.gamma_floor, self.damping_frac, self.grad_frac) < 0:
            raise ValidationError("weights must be >= 0")


@dataclass(frozen=True)
class DualState:
    """Running sums of the data and source residuals, one pair of vectors
    per (frequency, source). Starts at zero."""

    data: np.ndarray    # (nf, ns, M) complex
    source: np.ndarray  # (nf, ns, N) complex

    @staticmethod
    def zeros(nf: int, ns: int, m_rec: int, n: int) -> "DualState":
        return DualState(
            np.zeros((nf, ns, m_rec), dtype=complex),
            np.zeros((nf, ns, n), dtype=complex),
        )


@dataclass(frozen=True)
class IterationMetrics:
    """Per-iteration diagnostics; residuals are stacked L2 norms over all
    gathers of the active batch, against the raw right-hand sides."""

    iteration: int
    data_residual: float
    wave_residual: float
    model_error: float | None
    wavefield_error: float | None
    tv: float
    objective_j: float
    gamma: float
    lambda1: float


def reconstruct_wavefields(
    ops: list[HelmholtzOperator],
    m_values: np.ndarray,
    sources: np.ndarray,
    data_entries: np.ndarray,
    receiver_idx: np.ndarray,
    duals: DualState,
    lambda0: float,
    lambda1: float,
    backend: str = "direct",
    threads: int = 1,
) -> tuple[np.ndarray, list[sp.csc_matrix]]:
    """Solve the joint data/wave-equation fit for every gather.

    Returns the wavefield batch (nf, ns, N) and the per-frequency operator
    matrices (reused by the caller for residuals and dual updates). The
    normal factorization is built once per frequency and shared across
    sources.
    """
    nf, ns, _ = sources.shape
    u = np.zeros_like(sources)
    A_list: list[sp.csc_matrix] = [None] * nf  # type: ignore[list-item]

    def one_freq(i: int) -> None:
        A = assemble_A_values(ops[i], m_values)
        A_list[i] = A
        normal = linalg.WavefieldNormal(A, receiver_idx, lambda0, lambda1, backend)
        for s in range(ns):
            try:
                u[i, s] = normal.solve(
                    data_entries[i, s] + duals.data[i, s],
                    sources[i, s] + duals.source[i, s],
                )
            except NumericalError as exc:
                raise NumericalError(
                    f"wavefield solve failed at frequency index {i}, source {s}: {exc}"
                ) from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one_freq, range(nf)))
    else:
        for i in range(nf):
            one_freq(i)
    return u, A_list


def update_outer_duals(
    duals: DualState,
    A_list: list[sp.csc_matrix],
    u: np.ndarray,
    sources: np.ndarray,
    data_entries: np.ndarray,
    receiver_idx: np.ndarray,
    alpha: float,
) -> DualState:
    """One relaxed half-step: add alpha times the current constraint
    residuals to the running sums."""
    nf, ns, _ = u.shape
    new_data = duals.data.copy()
    new_source = duals.source.copy()
    for i in range(nf):
        for s in range(ns):
            new_data[i, s] += alpha * (data_entries[i, s] - u[i, s][receiver_idx])
            new_source[i, s] += alpha * (sources[i, s] - A_list[i] @ u[i, s])
    return DualState(new_data, new_source)


def compute_zeta(ops: list[HelmholtzOperator], u: np.ndarray) -> float:
    """Mean over cells of the stacked squared Jacobian diagonal,
    sum_{freq,src} |omega^2 c u|^2. Scale reference for the splitting weights."""
    nf, ns, n = u.shape
    acc = np.zeros(n)
    for i in range(nf):
        for s in range(ns):
            acc += np.abs(model_jacobian_diag(ops[i], u[i, s])) ** 2
    return float(acc.mean())


def assemble_model_system(
    ops: list[HelmholtzOperator],
    u: np.ndarray,
    sources: np.ndarray,
    dual_source: np.ndarray,
    split: tv.SplitState,
    weights: tv.SplitWeights,
    lambda1: float,
    damping_abs: float,
) -> tuple[sp.csc_matrix, np.ndarray]:
    """Stack the linearized wave-equation normal systems over all gathers
    and add the splitting penalty.

    The wave-equation Jacobian is diagonal, so its normal matrix is the
    diagonal of summed squared magnitudes; the right-hand side takes the
    real part of the Hermitian product, which keeps the model real and
    reproduces the real-valued formulas when everything is real.
    """
    nf, ns, n = u.shape
    diag = np.zeros(n)
    g = np.zeros(n)
    for i in range(nf):
        lap = ops[i].laplacian
        for s in range(ns):
            jac = model_jacobian_diag(ops[i], u[i, s])
            y = sources[i, s] + dual_source[i, s] - lap @ u[i, s]
            diag += np.abs(jac) ** 2
            g += np.real(np.conj(jac) * y)
    diag = lambda1 * diag + damping_abs
    g *= lambda1

    ops2d = tv.diff_ops(split.nz, split.nx)
    H = sp.diags(diag + weights.box)
    if weights.tv > 0.0:
        H = H + weights.tv * ops2d.gram
    if weights.box > 0.0:
        g = g + weights.box * (split.box + split.dual_box)
    if weights.tv > 0.0:
        g = g + weights.tv * (
            ops2d.d_x.T @ (split.tv_x + split.dual_x)
            + ops2d.d_z.T @ (split.tv_z + split.dual_z)
        )
    return H.tocsc(), g


def estimate_model(
    ops: list[HelmholtzOperator],
    u: np.ndarray,
    sources: np.ndarray,
    dual_source: np.ndarray,
    split: tv.SplitState,
    weights: tv.SplitWeights,
    lambda1: float,
    damping_abs: float,
    backend: str = "direct",
) -> np.ndarray:
    """Solve the stacked model system; returns the raw (unprojected) update."""
    H, g = assemble_model_system(
        ops, u, sources, dual_source, split, weights, lambda1, damping_abs
    )
    return linalg.solve_model_normal(H, g, backend=backend)


@dataclass
class _BatchContext:
    freq_indices: list[int]
    ops: list[HelmholtzOperator]
    sources: np.ndarray
    data: np.ndarray
    lambda1: float
    eps_d: float
    truth_fields: np.ndarray | None


class Inversion:
    """Driver owning the mutable state of one inversion run.

    Frequency batches restart the dual and splitting variables; the model
    estimate carries across batches and passes.
    """

    def __init__(
        self,
        grid: Grid,
        survey: Survey,
        dataset: DataSet,
        operators: list[HelmholtzOperator],
        initial: Model,
        config: PenaltyConfig,
        mode: str = MODE_REFINED,
        bounds_on: bool = False,
        tv_on: bool = False,
        bounds: Bounds | None = None,
        truth: Model | None = None,
        backend: str = "direct",
        threads: int = 1,
        seed: int = 0,
    ):
        if mode not in (MODE_PENALTY, MODE_REFINED):
            raise ValidationError(f"unknown mode {mode!r}")
        if bounds_on and bounds is None:
            raise ValidationError("bounds_on requires a Bounds instance")
        if len(operators) != len(survey.frequencies):
            raise ValidationError("need one operator per survey frequency")
        if dataset.entries.shape[:2] != (len(survey.frequencies), survey.n_sources):
            raise ValidationError("dataset shape does not match survey")
        self.grid = grid
        self.survey = survey
        self.dataset = dataset
        self.operators = operators
        self.config = config
        self.mode = mode
        self.bounds_on = bounds_on
        self.tv_on = tv_on
        self.bounds = bounds
        self.truth = truth
        self.backend = backend
        self.threads = threads
        self.seed = seed

        self.receiver_idx = sampling_indices(survey, grid)
        self.all_sources = build_sources(grid, survey)
        self.m = initial.values.copy()
        self.iteration = 0
        self.metrics: list[IterationMetrics] = []
        self.last_wavefields: np.ndarray | None = None
        self.last_duals: DualState | None = None
        self._truth_fields_cache: np.ndarray | None = None

    # -- batch preparation ------------------------------------------------

    def _freq_indices(self, batch: list[float]) -> list[int]:
        out = []
        for f in batch:
            matches = [i for i, g in enumerate(self.survey.frequencies)
                       if abs(g - f) < 1e-9]
            if not matches:
                raise ValidationError(f"batch frequency {f} Hz not present in survey")
            out.append(matches[0])
        return out

    def _spectral_lambda1(self, ctx_ops, m_values) -> float:
        # xi of the block-diagonal multi-frequency normal operator is the
        # max over the per-frequency constants
        xi = 0.0
        for op in ctx_ops:
            fact = linalg.factor(assemble_A_values(op, m_values))
            xi = max(
                xi,
                linalg.power_iteration_xi(
                    fact, self.receiver_idx, self.config.xi_power_iters, self.seed
                ),
            )
        if xi <= 0:
            raise NumericalError("spectral constant estimate is not positive")
        return self.config.lambda_frac * xi

    def _truth_fields(self) -> np.ndarray | None:
        if self.truth is None:
            return None
        if self._truth_fields_cache is None:
            u = np.zeros_like(self.all_sources)
            for i, op in enumerate(self.operators):
                fact = linalg.factor(assemble_A_values(op, self.truth.values))
                for s in range(self.survey.n_sources):
                    u[i, s] = fact.solve(self.all_sources[i, s])
            self._truth_fields_cache = u
        return self._truth_fields_cache

    def _make_batch(self, batch: list[float], sched: BatchSchedule) -> _BatchContext:
        idxs = self._freq_indices(batch)
        ctx_ops = [self.operators[i] for i in idxs]
        eps_d = sched.eps_d
        if sched.eps_d_from_noise:
            if self.dataset.noise_norms is None:
                raise ValidationError(
                    "noise-based data tolerance requires a dataset with recorded noise"
                )
            eps_d = float(np.sqrt((self.dataset.noise_norms[idxs] ** 2).sum()))
        truth_fields = self._truth_fields()
        return _BatchContext(
            freq_indices=idxs,
            ops=ctx_ops,
            sources=self.all_sources[idxs],
            data=self.dataset.entries[idxs],
            lambda1=self._spectral_lambda1(ctx_ops, self.m),
            eps_d=eps_d,
            truth_fields=None if truth_fields is None else truth_fields[idxs],
        )

    # -- one outer iteration ----------------------------------------------

    def _split_weights(self, ctx, zeta, iter_in_batch, split) -> tv.SplitWeights:
        cfg = self.config
        if self.tv_on:
            if cfg.gamma_policy == "zeta":
                units = gamma_schedule(
                    iter_in_batch, cfg.gamma_init, cfg.gamma_decay_every,
                    cfg.gamma_decay_factor, cfg.gamma_floor,
                )
                gamma = units * zeta * ctx.lambda1
            else:
                ops2d = tv.diff_ops(split.nz, split.nx)
                mag = np.hypot(
                    ops2d.d_x @ self.m - split.dual_x,
                    ops2d.d_z @ self.m - split.dual_z,
                )
                gamma = cfg.grad_frac * float(mag.max())
        else:
            gamma = 0.0
        if self.bounds_on and iter_in_batch >= cfg.bounds_start_iter:
            g0_init = cfg.gamma0_init if cfg.gamma0_init is not None else cfg.gamma_init
            if cfg.gamma_policy == "zeta" or not self.tv_on:
                units0 = gamma_schedule(
                    iter_in_batch, g0_init, cfg.gamma_decay_every,
                    cfg.gamma_decay_factor, cfg.gamma_floor,
                )
                gamma0 = units0 * zeta * ctx.lambda1
            else:
                gamma0 = gamma
        else:
            gamma0 = 0.0
        return tv.SplitWeights(box=gamma0, tv=gamma)

    def _iterate(self, ctx: _BatchContext, iter_in_batch: int,
                 duals: DualState, split: tv.SplitState
                 ) -> tuple[DualState, tv.SplitState, IterationMetrics]:
        cfg = self.config
        alpha = cfg.alpha
        refine = self.mode == MODE_REFINED

        u, A_list = reconstruct_wavefields(
            ctx.ops, self.m, ctx.sources, ctx.data, self.receiver_idx,
            duals, 1.0, ctx.lambda1, self.backend, self.threads,
        )
        if refine:
            duals = update_outer_duals(
                duals, A_list, u, ctx.sources, ctx.data, self.receiver_idx, alpha
            )

        zeta = compute_zeta(ctx.ops, u)
        weights = self._split_weights(ctx, zeta, iter_in_batch, split)
        damping_abs = ctx.lambda1 * cfg.damping_frac * zeta

        m_new = estimate_model(
            ctx.ops, u, ctx.sources, duals.source, split, weights,
            ctx.lambda1, damping_abs, self.backend,
        )
        if not np.all(np.isfinite(m_new)):
            raise NumericalError("model update produced non-finite values")

        use_split = weights.box > 0.0 or weights.tv > 0.0
        if use_split:
            lower = self.bounds.lower if self.bounds is not None else -np.inf
            upper = self.bounds.upper if self.bounds is not None else np.inf
            split = tv.update_aux_duals(split, m_new, 0.5)
            split = tv.update_aux(m_new, split, lower, upper, weights)
            split = tv.update_aux_duals(split, m_new, 0.5)

        # residuals against the raw right-hand sides, with the new model
        A_new = [assemble_A_values(op, m_new) for op in ctx.ops]
        nf, ns, _ = u.shape
        data_sq = 0.0
        wave_sq = 0.0
        resid_half_sq = 0.0
        r_data = np.zeros_like(ctx.data)
        r_src = np.zeros_like(u)
        for i in range(nf):
            for s in range(ns):
                rd = ctx.data[i, s] - u[i, s][self.receiver_idx]
                rb = ctx.sources[i, s] - A_new[i] @ u[i, s]
                r_data[i, s] = rd
                r_src[i, s] = rb
                data_sq += float(np.vdot(rd, rd).real)
                wave_sq += float(np.vdot(rb, rb).real)
                rh = rb + duals.source[i, s]
                resid_half_sq += float(np.vdot(rh, rh).real)

        objective = 0.0
        if use_split:
            objective += float(np.hypot(split.tv_x, split.tv_z).sum())
        objective += 0.5 * ctx.lambda1 * resid_half_sq

        if refine:
            new_data = duals.data + alpha * r_data
            new_source = duals.source + alpha * r_src
            duals = DualState(new_data, new_source)

        self.m = m_new
        self.last_wavefields = u
        self.last_duals = duals
        self.iteration += 1
        metrics = IterationMetrics(
            iteration=self.iteration,
            data_residual=float(np.sqrt(data_sq)),
            wave_residual=float(np.sqrt(wave_sq)),
            model_error=(
                None if self.truth is None else
                float(np.linalg.norm(m_new - self.truth.values)
                      / np.linalg.norm(self.truth.values))
            ),
            wavefield_error=(
                None if ctx.truth_fields is None else
                float(np.linalg.norm((u - ctx.truth_fields).ravel())
                      / np.linalg.norm(ctx.truth_fields.ravel()))
            ),
            tv=tv.isotropic_tv(m_new, self.grid.nz, self.grid.nx),
            objective_j=objective,
            gamma=weights.tv,
            lambda1=ctx.lambda1,
        )
        self.metrics.append(metrics)
        return duals, split, metrics

    # -- batch & schedule loops -------------------------------------------

    def run_batch(self, batch: list[float], sched: BatchSchedule) -> None:
        ctx = self._make_batch(batch, sched)
        nf = len(ctx.freq_indices)
        duals = DualState.zeros(nf, self.survey.n_sources,
                                self.survey.n_receivers, self.grid.n)
        lower = self.bounds.lower if self.bounds is not None else None
        upper = self.bounds.upper if self.bounds is not None else None
        split = tv.SplitState.initial(self.m, self.grid.nz, self.grid.nx, lower, upper)
        it = 0
        while True:
            duals, split, metrics = self._iterate(ctx, it, duals, split)
            it += 1
            if stopping_check(metrics.wave_residual, metrics.data_residual, it, sched,
                              eps_d_override=ctx.eps_d):
                break

    def run(self, sched: BatchSchedule) -> tuple[Model, list[IterationMetrics]]:
        for start_freq, _pass_index in sched.paths:
            for batch in sched.batches_from(start_freq):
                self.run_batch(batch, sched)
        return Model.raw(self.grid, self.m), self.metrics
