import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import polygamma

from alphacf.invariants import duality_sides
from alphacf.mapcore import AlphaMap
from alphacf.transfer import (
    BKDeltaParams,
    ConvergenceError,
    GridFunction,
    apply_transfer,
    bkdelta_norm,
    bv_inequalities_check,
    closed_form_cell_averages,
    gauss_density,
    growth_constant,
    invariant_density,
    l1_distance,
    total_variation,
    transfer_pointwise,
    truncation_tail,
    ulam_matrix,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class TestUlamMatrix:
    def test_two_cell_gauss(self):
        # preimages of [0, 1/2) inside [0, 1/2) are the intervals (1/(j + 1/2), 1/j], j >= 2
        P = ulam_matrix(AlphaMap(1.0), 2).matrix.toarray()
        l2 = math.log(2.0)
        expected = np.array([[10 / 3 - 4 * l2, 4 * l2 - 7 / 3], [2 / 3, 1 / 3]])
        np.testing.assert_allclose(P, expected, atol=1e-12)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, GOLDEN, 0.7, 1.0])
    def test_rows_stochastic(self, alpha):
        op = ulam_matrix(AlphaMap(alpha), 512)
        assert op.matrix.data.min() >= 0.0
        np.testing.assert_allclose(op.row_sums(), 1.0, atol=1e-8)

    def test_truncated_rows_lose_tail(self):
        amap = AlphaMap(0.7)
        op = ulam_matrix(amap, 256, 100000)
        rows = op.row_sums()
        assert rows.max() <= 1.0 + 1e-12
        deficit = (1.0 - rows) * op.h
        assert deficit.sum() == pytest.approx(op.tail_mass, rel=1e-3, abs=1e-12)
        assert op.tail_mass == pytest.approx(truncation_tail(amap, 100000))
        # only the cells next to 0 feel the missing branches
        assert np.all(rows[np.abs(GridFunction.constant(amap, 256).centers) > 0.01] > 1.0 - 1e-8)

    @pytest.mark.parametrize("alpha", [0.5, 1.0])
    def test_leading_eigenvalue(self, alpha):
        assert ulam_matrix(AlphaMap(alpha), 256).leading_eigenvalue() == pytest.approx(1.0, abs=1e-10)


class TestApplyTransfer:
    def test_gauss_constant_series(self):
        amap = AlphaMap(1.0)
        one = lambda x: np.ones_like(x)  # noqa: E731
        y = np.array([0.0, 0.5, 1.0])
        expected = polygamma(1, y + 1.0)
        np.testing.assert_allclose(transfer_pointwise(amap, one, y), expected, rtol=1e-12)
        assert transfer_pointwise(amap, one, 0.0)[0] == pytest.approx(math.pi**2 / 6)
        assert transfer_pointwise(amap, one, 1.0)[0] == pytest.approx(math.pi**2 / 6 - 1.0)

    def test_grid_constant_matches_series(self):
        amap = AlphaMap(1.0)
        out = apply_transfer(GridFunction.constant(amap, 1024))
        np.testing.assert_allclose(out.values, polygamma(1, out.centers + 1.0), rtol=1e-10)

    @pytest.mark.parametrize("alpha", [0.4, 0.7, 1.0])
    def test_integral_preserved(self, alpha):
        amap = AlphaMap(alpha)
        f = lambda x: 1.0 + np.cos(3.0 * x)  # noqa: E731
        # Gauss-Legendre on the pieces between the cuts where truncated branches start
        lhs, _ = duality_sides(amap, f, np.ones_like)
        rhs = amap.length + (math.sin(3 * amap.right) - math.sin(3 * amap.left)) / 3
        assert lhs == pytest.approx(rhs, abs=1e-6)

    @pytest.mark.parametrize("alpha", [0.3, 0.62, 1.0])
    def test_duality(self, alpha):
        f = lambda x: np.exp(x)  # noqa: E731
        g = lambda y: 1.0 / (2.0 + y)  # noqa: E731
        lhs, rhs = duality_sides(AlphaMap(alpha), f, g)
        assert lhs == pytest.approx(rhs, abs=1e-5)

    def test_density_is_fixed_point(self, dens):
        rho = dens(0.7)
        out = apply_transfer(rho)
        assert l1_distance(out, rho) < 2 * rho.h * rho.total_variation()


class TestInvariantDensity:
    def test_gauss_density(self, dens):
        rho = dens(1.0)
        exact = GridFunction.from_function(rho.amap, rho.n_cells, gauss_density)
        assert l1_distance(rho, exact) < 1e-3
        assert rho.integral() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("alpha", [GOLDEN + 1e-9, 0.7, 0.85, 1.0])
    def test_closed_form_above_golden_mean(self, alpha, dens):
        rho = dens(alpha)
        exact = closed_form_cell_averages(alpha, rho.n_cells)
        assert np.abs(rho.values - exact).sum() * rho.h < 1e-3

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7, 1.0])
    def test_ulam_and_branch_sum_agree(self, alpha):
        amap = AlphaMap(alpha)
        a = invariant_density(amap, 1024)
        b = invariant_density(amap, 1024, realization="branch_sum")
        assert l1_distance(a, b) <= 2 * a.h * max(a.total_variation(), b.total_variation())

    @pytest.mark.parametrize("alpha", [0.2, 0.5, 0.7, 1.0])
    def test_positive(self, alpha):
        assert invariant_density(AlphaMap(alpha), 1024).values.min() > 1e-3

    def test_nonconvergence_reports_residual(self):
        with pytest.raises(ConvergenceError) as info:
            invariant_density(AlphaMap(0.6), 256, max_iter=1)
        assert info.value.residual > 1e-12

    def test_unknown_realization(self):
        with pytest.raises(ValueError):
            invariant_density(AlphaMap(0.6), 64, realization="monte_carlo")


class TestVariation:
    amap = AlphaMap(1.0)

    def test_constant(self):
        assert total_variation(GridFunction.constant(self.amap, 64)) == 0.0

    def test_indicator(self):
        f = GridFunction.from_function(self.amap, 64, lambda x: (x < 0.5).astype(float))
        assert total_variation(f) == 1.0

    def test_identity(self):
        f = GridFunction.from_function(self.amap, 1024, lambda x: x)
        assert total_variation(f) == pytest.approx(1.0, abs=1.0 / 1024)

    def test_sub_interval(self):
        f = GridFunction.from_function(self.amap, 1000, lambda x: x)
        assert total_variation(f, (0.25, 0.75)) == pytest.approx(0.5, abs=2e-3)

    def test_csv_round_trip(self, tmp_path):
        f = GridFunction.from_function(AlphaMap(0.6), 32, np.sin)
        f.to_csv(tmp_path / "f.csv")
        g = GridFunction.from_csv(AlphaMap(0.6), tmp_path / "f.csv")
        np.testing.assert_array_equal(f.values, g.values)
        header = (tmp_path / "f.csv").read_text().splitlines()[0]
        assert header == "cell_left,cell_right,value"


class TestBVInequalities:
    def test_smooth_case(self):
        amap = AlphaMap(1.0)
        f = GridFunction.from_function(amap, 1000, lambda x: x * x)
        g = GridFunction.constant(amap, 1000)
        assert bv_inequalities_check(f, g, (0.1, 0.9)).all_hold

    def test_restriction_tight_for_step(self):
        # a step that vanishes on J: var_J f = 0 and the two cut jumps give 2 sup|f|
        amap = AlphaMap(1.0)
        n = 1000
        f = GridFunction.from_function(amap, n, lambda x: np.where((x > 0.3) & (x < 0.7), 1.0, 0.0))
        rep = bv_inequalities_check(f, GridFunction.constant(amap, n), (0.3, 0.7))
        assert rep.restriction.holds
        assert rep.restriction.rhs - rep.restriction.lhs <= 2.0 / n * rep.restriction.rhs + 1e-12

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(-2, 2), min_size=5, max_size=5),
        st.lists(st.floats(-2, 2), min_size=5, max_size=5),
        st.floats(0.05, 1.0),
    )
    def test_random_piecewise_linear(self, a, b, alpha):
        amap = AlphaMap(alpha)
        e = np.linspace(amap.left, amap.right, 5)
        f = GridFunction.from_function(amap, 400, lambda x: np.interp(x, e, a))
        g = GridFunction.from_function(amap, 400, lambda x: np.interp(x, e, b))
        J = (amap.left + 0.1 * amap.length, amap.right - 0.2 * amap.length)
        assert bv_inequalities_check(f, g, J).all_hold


class TestBKDelta:
    def test_bv_function(self):
        amap = AlphaMap(0.7)
        f = GridFunction.from_function(amap, 4096, lambda x: x)
        p = BKDeltaParams(4, 0.4, 400)
        norm = bkdelta_norm(f, p)
        assert norm.value <= 4 ** (-0.4) * f.total_variation() + f.l1_norm() + 1e-9

    def test_log_is_finite_and_stabilizes(self):
        amap = AlphaMap(0.7)
        f = GridFunction.from_function(amap, 4096, lambda x: np.log(np.abs(x)))
        norm = bkdelta_norm(f, BKDeltaParams(20, 0.4, 500))
        assert np.isfinite(norm.value)
        assert norm.stabilized

    def test_warns_when_attained_at_cutoff(self):
        amap = AlphaMap(0.7)
        f = GridFunction.from_function(amap, 4096, lambda x: 1.0 / np.abs(x))
        with pytest.warns(RuntimeWarning):
            norm = bkdelta_norm(f, BKDeltaParams(4, 0.1, 50))
        assert not norm.stabilized

    def test_growth_bound(self):
        amap = AlphaMap(0.7)
        p = BKDeltaParams(4, 0.4, 500)
        assert p.satisfies_growth_hypothesis(amap)
        f = GridFunction.from_function(amap, 4096, lambda x: np.log(np.abs(x)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            norm = bkdelta_norm(f, p).value
        A = growth_constant(amap, p)
        c = f.centers
        keep = np.abs(c) > 1.0 / (p.k_max + amap.alpha)
        assert np.all(np.abs(f.values[keep]) <= A * norm / np.abs(c[keep]) ** p.delta)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            BKDeltaParams(4, 1.2, 10)
        with pytest.raises(ValueError):
            BKDeltaParams(40, 0.3, 10)
        assert not BKDeltaParams(3, 0.3, 10).satisfies_growth_hypothesis(AlphaMap(0.7))
