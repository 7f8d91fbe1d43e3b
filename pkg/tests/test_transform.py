import math

import numpy as np
import pytest

import kplane as K
from kplane.transform import pairing

from conftest import smooth_decaying

# T[(1+u^2)^{-(k+1)/2}](r) = c_k (1+r^2)^{-1/2} with c_k = B(k/2,1/2)/2
C_K = {1: math.pi / 2, 2: 1.0, 3: math.pi / 4}


class TestForwardClosedForms:
    @pytest.mark.parametrize("k,d", [(1, 3), (2, 4), (3, 4)])
    def test_extremizer_transform(self, grids, k, d):
        params = K.make_params(k, d)
        g = grids["half2048"]
        h = K.extremizer_profile(params, 1.0, g)
        th = K.apply_T(params, h)
        exact = C_K[k] * (1 + g.nodes ** 2) ** (-0.5)
        assert np.abs(th.values - exact).max() < 1e-9
        assert not th.meta["tail_warning"]

    def test_zero_maps_to_zero(self, grids):
        params = K.make_params(1, 3)
        g = grids["half1024"]
        z = K.RadialProfile(g, np.zeros(g.n))
        assert np.all(K.apply_T(params, z).values == 0.0)


class TestIndicatorTransform:
    @pytest.mark.parametrize("k,a", [(1, 1.0), (1, 2.5), (2, 1.0), (2, 3.0), (3, 2.0)])
    def test_ball_closed_form(self, grids, k, a):
        params = K.make_params(k, k + 2)
        g = grids["trunc50"]
        tf = K.apply_T_indicator(params, K.IntervalSet(((0.0, a),)), g)
        exact = np.maximum(a * a - g.nodes ** 2, 0.0) ** (k / 2) / k
        assert np.abs(tf.values - exact).max() < 1e-13

    def test_vanishes_beyond_support(self, grids):
        params = K.make_params(2, 3)
        tf = K.apply_T_indicator(params, K.IntervalSet(((1.0, 2.0),)), grids["trunc50"])
        assert np.all(tf.values[grids["trunc50"].nodes > 2.0] == 0.0)

    def test_apply_T_uses_exact_path(self, grids):
        params = K.make_params(1, 3)
        f = K.indicator_profile(grids["trunc50"], K.IntervalSet(((0.0, 2.0),)), 1.5)
        tf = K.apply_T(params, f)
        exact = 1.5 * np.sqrt(np.maximum(4.0 - grids["trunc50"].nodes ** 2, 0.0))
        assert np.abs(tf.values - exact).max() < 1e-12


class TestOperatorProperties:
    @pytest.mark.parametrize("k,d", [(1, 3), (2, 3)])
    def test_linearity(self, grids, k, d):
        params = K.make_params(k, d)
        g = grids["half1024"]
        rng = np.random.default_rng(4)
        f1 = smooth_decaying(params, g, rng)
        f2 = smooth_decaying(params, g, rng)
        a, b = 1.7, 0.6
        combo = K.RadialProfile(g, a * f1.values + b * f2.values)
        lhs = K.apply_T(params, combo).values
        rhs = a * K.apply_T(params, f1).values + b * K.apply_T(params, f2).values
        scale = np.abs(rhs).max()
        assert np.abs(lhs - rhs).max() <= 1e-12 * scale

    def test_positivity_even_on_rough_data(self, grids):
        params = K.make_params(1, 3)
        g = grids["half1024"]
        rng = np.random.default_rng(5)
        vals = rng.uniform(0, 1, g.n) * (g.nodes < 5.0)
        tf = K.apply_T(params, K.RadialProfile(g, vals))
        assert (tf.values >= 0.0).all()

    def test_monotonicity(self, grids):
        params = K.make_params(2, 3)
        g = grids["half1024"]
        rng = np.random.default_rng(6)
        f = smooth_decaying(params, g, rng)
        bump = smooth_decaying(params, g, rng, n_terms=1)
        fg = K.RadialProfile(g, f.values + bump.values)
        tf = K.apply_T(params, f).values
        tg = K.apply_T(params, fg).values
        scale = np.abs(tg).max()
        assert (tg - tf).min() >= -1e-9 * scale

    @pytest.mark.parametrize("k,d", [(1, 3), (2, 4)])
    def test_dilation_covariance(self, grids, k, d):
        # T f_lam(r) = lam^{d/p - k} (T f)(lam r), checked against the
        # closed form of the extremizer transform
        params = K.make_params(k, d)
        g = grids["half2048"]
        for lam in (0.5, 2.0):
            h_lam = K.extremizer_profile(params, lam, g)
            th = K.apply_T(params, h_lam).values
            expected = (lam ** (params.scale_exp_f - k)
                        * C_K[k] * (1 + (lam * g.nodes) ** 2) ** (-0.5))
            mask = g.nodes < g.r_max / max(lam, 1.0)
            rel = np.abs(th - expected)[mask] / np.abs(expected)[mask].max()
            assert rel.max() < 1e-8


class TestAdjoint:
    def test_zero(self, grids):
        params = K.make_params(2, 3)
        g = grids["half1024"]
        out = K.apply_T_adjoint(params, K.RadialProfile(g, np.zeros(g.n)))
        assert np.all(out.values == 0.0)

    @pytest.mark.parametrize("k,d", [(1, 3), (2, 3), (2, 4)])
    def test_adjoint_identity(self, grids, k, d):
        # profiles decay one power faster than critical so both pairings have
        # bounded theta-densities
        params = K.make_params(k, d)
        g = grids["half4096"]
        rng = np.random.default_rng(11)
        f = smooth_decaying(params, g, rng, decay_boost=1)
        gg = smooth_decaying(params, g, rng, decay_boost=1)
        tf = K.apply_T(params, f)
        tsg = K.apply_T_adjoint(params, gg)
        lhs = pairing(tf.values, gg.values, g, params.a_target)
        rhs = pairing(f.values, tsg.values, g, params.a_domain)
        assert abs(lhs - rhs) / abs(lhs) < 1e-8

    def test_indicator_closed_form(self, grids):
        # k=2, d=3, g = 1_{[0,1]}: T* g(u) = min(u,1)/u
        params = K.make_params(2, 3)
        g = grids["half1024"]
        gi = K.indicator_profile(g, K.IntervalSet(((0.0, 1.0),)))
        out = K.apply_T_adjoint(params, gi)
        exact = np.minimum(g.nodes, 1.0) / g.nodes
        assert np.abs(out.values - exact).max() < 1e-12


class TestDiscretized:
    def test_matches_indicator_transform(self):
        # away from the jump cell: a sampled representation cannot resolve
        # the transform pointwise inside the cell containing the cut
        params = K.make_params(2, 3)
        op = K.discretize_T_R(params, 2.0, 1024)
        f = K.indicator_profile(op.grid, K.IntervalSet(((0.0, 1.0),)))
        got = op.apply(f.values)
        exact = np.maximum(1.0 - op.grid.nodes ** 2, 0.0) / 2
        cut_cell = np.searchsorted(op.grid.nodes, 1.0)
        away = np.abs(np.arange(op.grid.n) - cut_cell) > 3
        assert np.abs(got - exact)[away].max() < 1e-6

    def test_entries_nonnegative(self):
        params = K.make_params(1, 3)
        op = K.discretize_T_R(params, 1.0, 128)
        assert (op.entries >= 0.0).all()

    def test_lower_triangular_like(self):
        params = K.make_params(2, 3)
        op = K.discretize_T_R(params, 1.0, 128)
        # kernel support u >= r: columns left of the diagonal vanish beyond
        # the interpolation stencil width
        for i in range(3, 128):
            assert np.all(op.entries[i, :i - 1] == 0.0)

    def test_matrix_continuous_agreement(self):
        # smooth gentle profile on [0, R]; n = 512 per the contract
        params = K.make_params(2, 3)
        op = K.discretize_T_R(params, 1.0, 512)
        lam = 0.5
        f = K.extremizer_profile(params, lam, op.grid)
        got = op.apply(f.values)
        ref = K.apply_T(params, f).values
        assert np.abs(got - ref).max() < 1e-6

    def test_singular_values_zero_matrix(self):
        params = K.make_params(1, 3)
        op = K.discretize_T_R(params, 1.0, 64)
        zero_op = K.OperatorMatrix(entries=np.zeros_like(op.entries), R=op.R,
                                   grid=op.grid, params=params)
        s = K.singular_value_profile(zero_op)
        assert np.all(s == 0.0)

    def test_singular_values_nonincreasing_and_decay(self):
        params = K.make_params(2, 3)
        ratios = []
        for n in (64, 128, 256):
            s = K.singular_value_profile(K.discretize_T_R(params, 1.0, n))
            assert (np.diff(s) <= 1e-12).all()
            ratios.append(s[n // 4] / s[0])
        assert ratios[0] > ratios[1] > ratios[2]


class TestSmallGrids:
    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_minimum_size_grids_work(self, k):
        params = K.make_params(k, k + 2)
        for hint in (5.0, float("inf")):
            g = K.make_grid(16, hint)
            h = K.extremizer_profile(params, 1.0, g)
            tf = K.apply_T(params, h)
            assert np.isfinite(tf.values).all() and (tf.values >= 0).all()
            adj = K.apply_T_adjoint(params, h)
            assert np.isfinite(adj.values).all()


class TestEquicontinuity:
    def test_zero_step(self):
        params = K.make_params(1, 3)
        assert K.equicontinuity_modulus(params, 1.0, 0.0) == 0.0

    def test_k2_closed_form(self):
        params = K.make_params(2, 4)
        R = 1.0
        for h in (1e-1, 1e-2):
            got = K.equicontinuity_modulus(params, R, h)
            assert got == pytest.approx((2 * R * h - h * h) / 2, rel=1e-6)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_vanishes_with_step(self, k):
        params = K.make_params(k, 4)
        vals = [K.equicontinuity_modulus(params, 1.0, h) for h in (1e-1, 1e-2, 1e-3)]
        assert vals[0] > vals[1] > vals[2] > 0
