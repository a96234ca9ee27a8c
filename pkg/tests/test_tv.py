import numpy as np
import pytest

from wri2d import tv


def scalar_prox_oracle(zx, zz, gamma):
    # cell-by-cell reimplementation of the vector soft threshold
    px = np.zeros_like(zx)
    pz = np.zeros_like(zz)
    for i in range(zx.size):
        r = np.sqrt(zx[i] ** 2 + zz[i] ** 2)
        if r == 0.0:
            continue
        shrunk = max(r - gamma, 0.0)
        px[i] = zx[i] * shrunk / r
        pz[i] = zz[i] * shrunk / r
    return px, pz


class TestGradients:
    def test_constant_maps_to_zero(self):
        assert np.all(tv.grad_x(np.full(20, 3.3), 4, 5) == 0.0)
        assert np.all(tv.grad_z(np.full(20, 3.3), 4, 5) == 0.0)

    def test_ramp_gives_constant_slope(self):
        nz, nx = 5, 6
        x_ramp = np.repeat(np.arange(nx, dtype=float) * 2.0, nz)  # depth-fastest
        gx = tv.grad_x(x_ramp, nz, nx).reshape((nz, nx), order="F")
        assert np.allclose(gx[:, :-1], 2.0)
        assert np.all(gx[:, -1] == 0.0)
        z_ramp = np.tile(np.arange(nz, dtype=float) * -1.5, nx)
        gz = tv.grad_z(z_ramp, nz, nx).reshape((nz, nx), order="F")
        assert np.allclose(gz[:-1, :], -1.5)
        assert np.all(gz[-1, :] == 0.0)

    def test_adjoint_identity(self):
        nz, nx = 7, 9
        ops = tv.diff_ops(nz, nx)
        rng = np.random.default_rng(11)
        for d in (ops.d_x, ops.d_z):
            for _ in range(20):
                m = rng.standard_normal(nz * nx)
                w = rng.standard_normal(nz * nx)
                lhs = np.dot(d @ m, w)
                rhs = np.dot(m, d.T @ w)
                assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(m) * np.linalg.norm(w)

    def test_gram_matches_stacked_operator(self):
        nz, nx = 5, 4
        ops = tv.diff_ops(nz, nx)
        explicit = (ops.d_x.T @ ops.d_x + ops.d_z.T @ ops.d_z).toarray()
        assert np.allclose(ops.gram.toarray(), explicit)


class TestProjectBox:
    def test_inside_unchanged(self):
        x = np.array([1.0, 2.0, 3.0])
        out = tv.project_box(x, np.zeros(3), np.full(3, 4.0))
        assert np.array_equal(out, x)

    def test_clamps(self):
        lo = np.full(4, 1.0)
        hi = np.full(4, 2.0)
        assert np.array_equal(tv.project_box(lo - 1.0, lo, hi), lo)
        assert np.array_equal(tv.project_box(hi + 5.0, lo, hi), hi)

    def test_idempotent_exactly(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(100)
        lo = np.full(100, -0.3)
        hi = np.full(100, 0.4)
        once = tv.project_box(x, lo, hi)
        assert np.array_equal(tv.project_box(once, lo, hi), once)


class TestProx:
    def test_zero_threshold_is_identity(self):
        rng = np.random.default_rng(4)
        zx = rng.standard_normal(50)
        zz = rng.standard_normal(50)
        px, pz = tv.prox_isotropic_tv(zx, zz, 0.0)
        assert np.array_equal(px, zx)
        assert np.array_equal(pz, zz)

    def test_three_four_five_cell(self):
        px, pz = tv.prox_isotropic_tv(np.array([3.0]), np.array([4.0]), 1.0)
        assert px[0] == pytest.approx(2.4, abs=1e-15)
        assert pz[0] == pytest.approx(3.2, abs=1e-15)

    def test_below_threshold_zeroed(self):
        px, pz = tv.prox_isotropic_tv(np.array([0.3, 0.0]), np.array([0.4, 0.0]), 0.5)
        assert np.array_equal(px, np.zeros(2))
        assert np.array_equal(pz, np.zeros(2))

    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(5)
        zx = rng.standard_normal(1000) * 3
        zz = rng.standard_normal(1000) * 3
        gamma = 1.7
        px, pz = tv.prox_isotropic_tv(zx, zz, gamma)
        ox, oz = scalar_prox_oracle(zx, zz, gamma)
        assert np.allclose(px, ox, atol=1e-14, rtol=0)
        assert np.allclose(pz, oz, atol=1e-14, rtol=0)

    def test_output_magnitude_exact(self):
        rng = np.random.default_rng(6)
        zx = rng.standard_normal(400)
        zz = rng.standard_normal(400)
        gamma = 0.8
        px, pz = tv.prox_isotropic_tv(zx, zz, gamma)
        r = np.hypot(zx, zz)
        assert np.allclose(np.hypot(px, pz), np.maximum(r - gamma, 0.0),
                           rtol=1e-14, atol=1e-16)

    def test_nonexpansive(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            a = rng.standard_normal(200)
            b = rng.standard_normal(200)
            c = rng.standard_normal(200)
            d = rng.standard_normal(200)
            pa, pb = tv.prox_isotropic_tv(a, b, 0.6)
            pc, pd = tv.prox_isotropic_tv(c, d, 0.6)
            lhs = np.hypot(pa - pc, pb - pd)
            rhs = np.hypot(a - c, b - d)
            assert np.linalg.norm(lhs) <= np.linalg.norm(rhs) + 1e-12


class TestSplitUpdates:
    def _state(self, nz=4, nx=5, seed=8):
        rng = np.random.default_rng(seed)
        m0 = rng.uniform(1.0, 2.0, nz * nx)
        return m0, tv.SplitState.initial(m0, nz, nx)

    def test_initial_state_consistent(self):
        m0, st = self._state()
        assert np.array_equal(st.box, m0)
        assert np.array_equal(st.tv_x, tv.grad_x(m0, st.nz, st.nx))
        assert np.all(st.dual_box == 0.0)

    def test_aux_update_constant_model_within_bounds(self):
        nz, nx = 4, 5
        m = np.full(nz * nx, 1.5)
        st = tv.SplitState.initial(m, nz, nx)
        lo, hi = np.full(m.size, 1.0), np.full(m.size, 2.0)
        new = tv.update_aux(m, st, lo, hi, tv.SplitWeights(box=1.0, tv=0.3))
        assert np.array_equal(new.box, m)
        assert np.all(new.tv_x == 0.0)
        assert np.all(new.tv_z == 0.0)

    def test_huge_threshold_zeroes_tv_aux(self):
        m0, st = self._state()
        lo, hi = np.full(m0.size, 0.0), np.full(m0.size, 5.0)
        new = tv.update_aux(m0, st, lo, hi, tv.SplitWeights(box=1.0, tv=1e9))
        assert np.all(new.tv_x == 0.0) and np.all(new.tv_z == 0.0)

    def test_aux_update_matches_scalar_path(self):
        m0, st = self._state(seed=9)
        rng = np.random.default_rng(10)
        st = tv.SplitState(st.nz, st.nx, st.box, st.tv_x, st.tv_z,
                           rng.standard_normal(m0.size) * 0.1,
                           rng.standard_normal(m0.size) * 0.1,
                           rng.standard_normal(m0.size) * 0.1)
        lo, hi = np.full(m0.size, 0.5), np.full(m0.size, 2.5)
        w = tv.SplitWeights(box=2.0, tv=0.05)
        new = tv.update_aux(m0, st, lo, hi, w)
        assert np.array_equal(new.box, np.clip(m0 - st.dual_box, lo, hi))
        ox, oz = scalar_prox_oracle(
            tv.grad_x(m0, st.nz, st.nx) - st.dual_x,
            tv.grad_z(m0, st.nz, st.nx) - st.dual_z,
            w.tv,
        )
        assert np.allclose(new.tv_x, ox, atol=1e-14)
        assert np.allclose(new.tv_z, oz, atol=1e-14)
        # duals untouched
        assert np.array_equal(new.dual_x, st.dual_x)

    def test_dual_update_zero_residual(self):
        m0, st = self._state(seed=12)
        new = tv.update_aux_duals(st, m0, 0.5)
        # initial auxiliaries equal the transformed model: duals stay zero
        assert np.all(new.dual_box == 0.0)
        assert np.all(new.dual_x == 0.0)
        assert np.all(new.dual_z == 0.0)

    def test_dual_update_arithmetic(self):
        nz = nx = 3
        m = np.zeros(9)
        st = tv.SplitState(nz, nx, np.full(9, 2.0), np.zeros(9), np.zeros(9),
                           np.zeros(9), np.zeros(9), np.zeros(9))
        new = tv.update_aux_duals(st, m, 0.5)
        assert np.allclose(new.dual_box, 1.0)

    def test_two_half_steps_equal_one_full(self):
        m0, st = self._state(seed=13)
        rng = np.random.default_rng(14)
        st = tv.SplitState(st.nz, st.nx,
                           rng.standard_normal(m0.size),
                           rng.standard_normal(m0.size),
                           rng.standard_normal(m0.size),
                           np.zeros(m0.size), np.zeros(m0.size), np.zeros(m0.size))
        twice = tv.update_aux_duals(tv.update_aux_duals(st, m0, 0.4), m0, 0.4)
        once = tv.update_aux_duals(st, m0, 0.8)
        assert np.allclose(twice.dual_box, once.dual_box, rtol=1e-14)
        assert np.allclose(twice.dual_x, once.dual_x, rtol=1e-14)

    def test_weight_validation(self):
        m0, st = self._state()
        with pytest.raises(ValueError):
            tv.update_aux_duals(st, m0, 0.0)


class TestStackedAdjoint:
    def test_identity_grad_stack(self):
        # stacked operator [I; Dx; Dz]: adjoint identity via the pieces
        nz, nx = 6, 5
        ops = tv.diff_ops(nz, nx)
        rng = np.random.default_rng(15)
        m = rng.standard_normal(nz * nx)
        w0 = rng.standard_normal(nz * nx)
        w1 = rng.standard_normal(nz * nx)
        w2 = rng.standard_normal(nz * nx)
        lhs = np.dot(m, w0) + np.dot(ops.d_x @ m, w1) + np.dot(ops.d_z @ m, w2)
        rhs = np.dot(m, w0 + ops.d_x.T @ w1 + ops.d_z.T @ w2)
        scale = np.linalg.norm(m) * max(map(np.linalg.norm, (w0, w1, w2)))
        assert abs(lhs - rhs) <= 1e-12 * scale
