import numpy as np
import pytest

from wri2d import linalg, tv
from wri2d.helmholtz import PmlProfile, assemble_A_values
from wri2d.inversion import (
    DualState,
    Inversion,
    PenaltyConfig,
    assemble_model_system,
    compute_zeta,
    estimate_model,
    reconstruct_wavefields,
    update_outer_duals,
)
from wri2d.model import Bounds, Grid, Model, make_inclusion_model, velocity_to_slowness2
from wri2d.schedule import simultaneous_schedule
from wri2d.survey import (
    Survey,
    build_operators,
    build_sources,
    forward_model,
    sampling_indices,
)


def small_problem(nz=20, nx=20, h=25.0, n_pml=3, freqs=(5.0,), n_src=1, v0=2000.0,
                  anomaly=True):
    grid = Grid(nz, nx, h, h)
    v = np.full((nz, nx), v0)
    if anomaly:
        v[8:12, 8:12] = 1.25 * v0
    truth = velocity_to_slowness2(grid, grid.flatten(v))
    pml = PmlProfile(n_pml=n_pml)
    pml = PmlProfile(n_pml, pml.resolve_sigma_max(grid, float(v.max())), pml.exponent)
    margin = (n_pml + 1) * h
    xs = np.linspace(margin, (nx - 1) * h - margin, max(n_src, 2))[:n_src]
    survey = Survey(
        sources=tuple((x, margin) for x in xs),
        receivers=tuple((x * h, margin) for x in range(n_pml + 1, nx - n_pml - 1)),
        frequencies=freqs,
    )
    data = forward_model(truth, survey, pml)
    ops = build_operators(grid, survey.frequencies, pml, float(v.max()))
    return grid, truth, pml, survey, data, ops


class TestReconstructWavefields:
    def test_true_model_fits_both_systems(self):
        grid, truth, pml, survey, data, ops = small_problem()
        idx = sampling_indices(survey, grid)
        sources = build_sources(grid, survey)
        duals = DualState.zeros(1, 1, len(idx), grid.n)
        xi = linalg.power_iteration_xi(
            linalg.factor(assemble_A_values(ops[0], truth.values)), idx, 30, 0
        )
        u, _ = reconstruct_wavefields(
            ops, truth.values, sources, data.entries, idx, duals, 1.0, 1e-5 * xi
        )
        d = data.entries[0, 0]
        b = sources[0, 0]
        A = assemble_A_values(ops[0], truth.values)
        assert np.linalg.norm(u[0, 0][idx] - d) <= 1e-6 * np.linalg.norm(d)
        assert np.linalg.norm(A @ u[0, 0] - b) <= 1e-6 * np.linalg.norm(b)

    def test_huge_wave_weight_limit(self):
        grid, truth, pml, survey, data, ops = small_problem()
        idx = sampling_indices(survey, grid)
        sources = build_sources(grid, survey)
        duals = DualState.zeros(1, 1, len(idx), grid.n)
        A = assemble_A_values(ops[0], truth.values)
        xi = linalg.power_iteration_xi(linalg.factor(A), idx, 30, 0)
        u, _ = reconstruct_wavefields(
            ops, truth.values, sources, data.entries, idx, duals, 1.0, 1e6 * xi
        )
        u_pde = linalg.factor(A).solve(sources[0, 0])
        assert np.linalg.norm(u[0, 0] - u_pde) <= 1e-4 * np.linalg.norm(u_pde)

    def test_deterministic(self):
        grid, truth, pml, survey, data, ops = small_problem()
        idx = sampling_indices(survey, grid)
        sources = build_sources(grid, survey)
        duals = DualState.zeros(1, 1, len(idx), grid.n)
        u1, _ = reconstruct_wavefields(ops, truth.values, sources, data.entries,
                                       idx, duals, 1.0, 1e-3)
        u2, _ = reconstruct_wavefields(ops, truth.values, sources, data.entries,
                                       idx, duals, 1.0, 1e-3)
        assert np.array_equal(u1, u2)


class TestOuterDuals:
    def test_feasible_point_leaves_duals_unchanged(self):
        grid, truth, pml, survey, data, ops = small_problem()
        idx = sampling_indices(survey, grid)
        sources = build_sources(grid, survey)
        A = assemble_A_values(ops[0], truth.values)
        u = linalg.factor(A).solve(sources[0, 0])[None, None, :]
        duals = DualState.zeros(1, 1, len(idx), grid.n)
        new = update_outer_duals(duals, [A], u, sources, data.entries, idx, 0.5)
        assert np.linalg.norm(new.data) <= 1e-9 * np.linalg.norm(data.entries)
        assert np.linalg.norm(new.source) <= 1e-9 * np.linalg.norm(sources)

    def test_half_step_arithmetic(self):
        grid, truth, pml, survey, data, ops = small_problem()
        idx = sampling_indices(survey, grid)
        sources = build_sources(grid, survey)
        u = np.zeros_like(sources)
        A = assemble_A_values(ops[0], truth.values)
        duals = DualState.zeros(1, 1, len(idx), grid.n)
        new = update_outer_duals(duals, [A], u, sources, data.entries, idx, 0.5)
        assert np.allclose(new.data[0, 0], 0.5 * data.entries[0, 0], rtol=0, atol=0)
        assert np.allclose(new.source[0, 0], 0.5 * sources[0, 0], rtol=0, atol=0)

    def test_two_half_steps_identity_is_exact(self):
        grid, truth, pml, survey, data, ops = small_problem()
        idx = sampling_indices(survey, grid)
        sources = build_sources(grid, survey)
        rng = np.random.default_rng(0)
        u = (rng.standard_normal(sources.shape)
             + 1j * rng.standard_normal(sources.shape))
        A = assemble_A_values(ops[0], truth.values)
        d0 = DualState.zeros(1, 1, len(idx), grid.n)
        half = update_outer_duals(d0, [A], u, sources, data.entries, idx, 0.5)
        full = update_outer_duals(half, [A], u, sources, data.entries, idx, 0.5)
        expect = half.source[0, 0] + 0.5 * (sources[0, 0] - A @ u[0, 0])
        assert np.array_equal(full.source[0, 0], expect)


class TestEstimateModel:
    def test_exact_wavefield_recovers_model(self):
        grid, truth, pml, survey, data, ops = small_problem()
        sources = build_sources(grid, survey)
        A = assemble_A_values(ops[0], truth.values)
        u = linalg.factor(A).solve(sources[0, 0])[None, None, :]
        split = tv.SplitState.initial(truth.values, grid.nz, grid.nx)
        m_est = estimate_model(
            ops, u, sources, np.zeros_like(sources), split,
            tv.SplitWeights(box=0.0, tv=0.0), lambda1=1.0, damping_abs=0.0,
        )
        mag = np.abs(u[0, 0])
        strong = mag > 1e-3 * mag.max()
        rel = np.abs(m_est - truth.values)[strong] / truth.values[strong]
        assert rel.max() <= 1e-6
        assert m_est.dtype == np.float64

    def test_huge_split_weight_pins_model_to_prior(self):
        grid, truth, pml, survey, data, ops = small_problem()
        sources = build_sources(grid, survey)
        rng = np.random.default_rng(1)
        u = 1e-8 * (rng.standard_normal(sources.shape)
                    + 1j * rng.standard_normal(sources.shape))
        prior = truth.values * rng.uniform(0.9, 1.1, grid.n)
        split = tv.SplitState.initial(prior, grid.nz, grid.nx)
        m_est = estimate_model(
            ops, u, sources, np.zeros_like(sources), split,
            tv.SplitWeights(box=1e6, tv=1e6), lambda1=1.0, damping_abs=0.0,
        )
        assert np.linalg.norm(m_est - prior) <= 1e-6 * np.linalg.norm(prior)

    def test_system_symmetric(self):
        grid, truth, pml, survey, data, ops = small_problem()
        sources = build_sources(grid, survey)
        rng = np.random.default_rng(2)
        u = rng.standard_normal(sources.shape) + 1j * rng.standard_normal(sources.shape)
        split = tv.SplitState.initial(truth.values, grid.nz, grid.nx)
        H, g = assemble_model_system(
            ops, u, sources, np.zeros_like(sources), split,
            tv.SplitWeights(box=2.0, tv=3.0), lambda1=0.7, damping_abs=0.1,
        )
        asym = np.abs((H - H.T).toarray()).max()
        assert asym <= 1e-13 * np.abs(H.toarray()).max()
        assert np.isrealobj(g)

    def test_two_source_aggregation_is_sum_of_systems(self):
        grid, truth, pml, survey, data, ops = small_problem(n_src=2)
        sources = build_sources(grid, survey)
        rng = np.random.default_rng(3)
        u = rng.standard_normal(sources.shape) + 1j * rng.standard_normal(sources.shape)
        zeros = np.zeros_like(sources)
        split = tv.SplitState.initial(truth.values, grid.nz, grid.nx)
        w = tv.SplitWeights(box=0.0, tv=0.0)
        H_all, g_all = assemble_model_system(ops, u, sources, zeros, split, w, 0.9, 0.0)
        H_1, g_1 = assemble_model_system(
            ops, u[:, :1], sources[:, :1], zeros[:, :1], split, w, 0.9, 0.0)
        H_2, g_2 = assemble_model_system(
            ops, u[:, 1:], sources[:, 1:], zeros[:, 1:], split, w, 0.9, 0.0)
        scale = np.abs(H_all.toarray()).max()
        assert np.abs((H_all - (H_1 + H_2)).toarray()).max() <= 1e-13 * scale
        assert np.allclose(g_all, g_1 + g_2, rtol=1e-13, atol=1e-13 * np.abs(g_all).max())


class TestZeta:
    def test_zero_field(self):
        grid, truth, pml, survey, data, ops = small_problem()
        assert compute_zeta(ops, np.zeros((1, 1, grid.n), complex)) == 0.0

    def test_constant_field_no_pml(self):
        grid = Grid(10, 10, 5.0, 5.0)
        ops = build_operators(grid, (4.0,), PmlProfile(n_pml=0, sigma_max=0.0), 2000.0)
        c = 2.5
        u = np.full((1, 1, grid.n), c, dtype=complex)
        omega = 2 * np.pi * 4.0
        assert compute_zeta(ops, u) == pytest.approx(omega**4 * c**2, rel=1e-12)

    def test_quadratic_scaling(self):
        grid, truth, pml, survey, data, ops = small_problem()
        rng = np.random.default_rng(4)
        u = rng.standard_normal((1, 1, grid.n)) + 1j * rng.standard_normal((1, 1, grid.n))
        assert compute_zeta(ops, 2.0 * u) == pytest.approx(4.0 * compute_zeta(ops, u),
                                                           rel=1e-12)


class TestSingleIteration:
    def make_inversion(self, mode="irwri", priors=False, k_max=1, **kwargs):
        grid, truth, pml, survey, data, ops = small_problem(**kwargs)
        start = Model(grid, np.full(grid.n, truth.values.mean()))
        inv = Inversion(
            grid, survey, data, ops, start,
            PenaltyConfig(damping_frac=0.0), mode=mode,
            bounds_on=priors, tv_on=priors,
            bounds=Bounds.from_model(truth) if priors else None,
            truth=truth, seed=1,
        )
        return inv, simultaneous_schedule(list(survey.frequencies), k_max=k_max), truth

    def test_wri_mode_keeps_duals_zero(self):
        inv, sched, _ = self.make_inversion(mode="wri", k_max=3)
        inv.run(sched)
        assert np.all(inv.last_duals.data == 0.0)
        assert np.all(inv.last_duals.source == 0.0)

    def test_refined_mode_moves_duals(self):
        inv, sched, _ = self.make_inversion(mode="irwri", k_max=3)
        inv.run(sched)
        assert np.any(inv.last_duals.data != 0.0)

    def test_metrics_finite_and_nonnegative(self):
        inv, sched, _ = self.make_inversion(mode="irwri", priors=True, k_max=4)
        _, metrics = inv.run(sched)
        assert len(metrics) == 4
        for m in metrics:
            for v in (m.data_residual, m.wave_residual, m.tv, m.objective_j):
                assert np.isfinite(v) and v >= 0.0

    def test_fixed_point_keeps_model(self):
        grid, truth, pml, survey, data, ops = small_problem()
        inv = Inversion(
            grid, survey, data, ops, truth, PenaltyConfig(damping_frac=0.0),
            mode="irwri", bounds_on=False, tv_on=False, seed=2,
        )
        inv.run(simultaneous_schedule(list(survey.frequencies), k_max=1))
        assert np.linalg.norm(inv.m - truth.values) <= 1e-8 * np.linalg.norm(truth.values)

    def test_iteration_one_beats_initial_misfit(self):
        # rescaled box-anomaly benchmark, background start
        grid = Grid(41, 61, 25.0, 25.0)
        truth, gradient_start, _ = make_inclusion_model(grid)
        pml = PmlProfile(n_pml=6)
        vmax = 5000.0
        pml = PmlProfile(6, pml.resolve_sigma_max(grid, vmax), 2.0)
        top = 6 * 25.0
        survey = Survey(
            sources=tuple((x, top) for x in np.linspace(top, 54 * 25.0, 5)),
            receivers=tuple((x, top) for x in np.linspace(top, 54 * 25.0, 33)),
            frequencies=(2.5, 5.0, 7.0),
        )
        data = forward_model(truth, survey, pml)
        data_start = forward_model(gradient_start, survey, pml)
        initial_misfit = np.linalg.norm((data.entries - data_start.entries).ravel())
        ops = build_operators(grid, survey.frequencies, pml, vmax)
        inv = Inversion(grid, survey, data, ops, gradient_start,
                        PenaltyConfig(), mode="irwri", seed=3)
        _, metrics = inv.run(simultaneous_schedule([2.5, 5.0, 7.0], k_max=1))
        assert metrics[0].data_residual < initial_misfit


class TestBatchedRuns:
    def test_delayed_bounds_match_unbounded_until_activation(self):
        grid, truth, pml, survey, data, ops = small_problem()
        start = Model(grid, np.full(grid.n, truth.values.mean()))
        sched = simultaneous_schedule(list(survey.frequencies), k_max=3)
        cfg_delayed = PenaltyConfig(bounds_start_iter=100)
        inv_delayed = Inversion(grid, survey, data, ops, start, cfg_delayed,
                                mode="irwri", bounds_on=True,
                                bounds=Bounds.from_model(truth), seed=4)
        inv_off = Inversion(grid, survey, data, ops, start, PenaltyConfig(),
                            mode="irwri", bounds_on=False, seed=4)
        _, m_delayed = inv_delayed.run(sched)
        _, m_off = inv_off.run(sched)
        for a, b in zip(m_delayed, m_off):
            assert a.data_residual == b.data_residual
            assert a.wave_residual == b.wave_residual

    def test_multi_batch_multi_path_run(self):
        grid, truth, pml, survey, data, ops = small_problem(freqs=(4.0, 5.0, 6.0))
        from wri2d.schedule import make_schedule
        sched = make_schedule(4.0, 6.0, 1.0, batch_size=2, overlap=1, k_max=2,
                              paths=[(4.0, 1), (5.0, 2)])
        start = Model(grid, np.full(grid.n, truth.values.mean()))
        inv = Inversion(grid, survey, data, ops, start, PenaltyConfig(),
                        mode="irwri", truth=truth, seed=6)
        final, metrics = inv.run(sched)
        # pass 1 walks [4,5] and [5,6]; pass 2 restarts at [5,6]: 3 batches x k_max
        assert len(metrics) == 6
        assert all(np.isfinite(m.data_residual) for m in metrics)
        # duals restart per batch: recorded wavefields match the last batch size
        assert inv.last_wavefields.shape[0] == 2

    def test_unknown_batch_frequency_rejected(self):
        grid, truth, pml, survey, data, ops = small_problem(freqs=(5.0,))
        start = Model(grid, np.full(grid.n, truth.values.mean()))
        inv = Inversion(grid, survey, data, ops, start, PenaltyConfig(),
                        mode="irwri", seed=6)
        from wri2d.schedule import simultaneous_schedule as sim
        with pytest.raises(Exception):
            inv.run(sim([9.0], k_max=1))


class TestPenaltyConfigValidation:
    def test_bad_alpha(self):
        with pytest.raises(Exception):
            PenaltyConfig(alpha=1.0)

    def test_bad_decay(self):
        with pytest.raises(Exception):
            PenaltyConfig(gamma_decay_factor=0.5)
