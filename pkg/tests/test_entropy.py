import json
import math
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from alphacf.entropy import (
    HolderFit,
    SweepConfig,
    SweepResult,
    EntropyEstimate,
    alpha_grid,
    birkhoff_entropy,
    detect_kink,
    holder_fit,
    monotonicity_changes,
    rohlin_entropy,
    sweep_entropy,
    write_fit_json,
)
from alphacf.mapcore import AlphaMap, DomainError
from alphacf.observables import LogDerivative
from alphacf.transfer import (
    GridFunction,
    closed_form_cell_averages,
    closed_form_density_translated,
)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
GAUSS_ENTROPY = math.pi**2 / (6.0 * math.log(2.0))


class TestRohlin:
    def test_gauss(self, dens):
        est = rohlin_entropy(AlphaMap(1.0), dens(1.0))
        assert est.value == pytest.approx(GAUSS_ENTROPY, abs=1e-3)
        assert est.method == "rohlin"
        assert 0 < est.error_proxy < 1e-2

    def test_golden_mean_closed_form_against_quadrature(self):
        amap = AlphaMap(GOLDEN)
        g = GridFunction(amap, closed_form_cell_averages(GOLDEN, 4096))
        value = rohlin_entropy(amap, g).value

        def integrand(x):
            return -2.0 * math.log(abs(x)) * float(closed_form_density_translated(GOLDEN, x - GOLDEN + 1.0))

        brk = (1.0 - GOLDEN**2) / GOLDEN + GOLDEN - 1.0
        pts = sorted([amap.left, 0.0, brk, amap.right])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ref = sum(quad(integrand, a, b, limit=200)[0] for a, b in zip(pts[:-1], pts[1:]))
        assert value == pytest.approx(ref, abs=1e-4)

    def test_uniform_density_is_finite(self):
        amap = AlphaMap(0.5)
        est = rohlin_entropy(amap, GridFunction.constant(amap, 1024))
        # -2 int log|x| over [-1/2, 1/2] = 2 (1 + log 2)
        assert est.value == pytest.approx(2.0 * (1.0 + math.log(2.0)), rel=1e-12)

    def test_halving_the_cell_at_zero(self):
        # the cell containing 0 contributes the same whether or not it is split at its midpoint
        amap = AlphaMap(0.7)
        e = GridFunction.constant(amap, 1023).edges
        k = int(np.searchsorted(e, 0.0)) - 1
        a, b = e[k], e[k + 1]
        assert a < 0.0 < b
        obs = LogDerivative()
        whole = obs.cell_averages(np.array([a, b]))[0] * (b - a)
        m = 0.5 * (a + b)
        halves = obs.cell_averages(np.array([a, m, b])) * np.array([m - a, b - m])
        assert halves.sum() == pytest.approx(whole, abs=1e-6)

    def test_rejects_foreign_density(self, dens):
        with pytest.raises(ValueError):
            rohlin_entropy(AlphaMap(0.5), dens(1.0))


class TestBirkhoff:
    def test_gauss(self, dens):
        est = birkhoff_entropy(AlphaMap(1.0), 10_000, 1000, seed=1, density=dens(1.0))
        assert est.value == pytest.approx(GAUSS_ENTROPY, abs=0.01)
        assert abs(est.value - GAUSS_ENTROPY) <= 3 * est.error_proxy

    @pytest.mark.parametrize("alpha", [0.4, 0.62, 0.7, 0.75, 1.0])
    def test_agrees_with_rohlin(self, alpha, dens):
        amap = AlphaMap(alpha)
        rho = dens(alpha)
        r = rohlin_entropy(amap, rho)
        b = birkhoff_entropy(amap, 10_000, 1000, seed=3, density=rho)
        assert abs(r.value - b.value) <= 3.0 * math.hypot(r.error_proxy, b.error_proxy)

    def test_stderr_scales_with_orbit_length(self, dens):
        amap = AlphaMap(0.7)
        short = birkhoff_entropy(amap, 2500, 2000, seed=4, density=dens(0.7))
        long = birkhoff_entropy(amap, 10_000, 2000, seed=5, density=dens(0.7))
        assert 0.4 <= long.error_proxy / short.error_proxy <= 0.6

    def test_deterministic(self, dens):
        a = birkhoff_entropy(AlphaMap(0.7), 500, 50, seed=9, density=dens(0.7))
        b = birkhoff_entropy(AlphaMap(0.7), 500, 50, seed=9, density=dens(0.7))
        assert a == b

    def test_lebesgue_seeds(self, dens):
        amap = AlphaMap(0.7)
        est = birkhoff_entropy(amap, 5000, 400, seed=2, lebesgue=True, burn_in=1000)
        assert est.params["lebesgue"]
        ref = rohlin_entropy(amap, dens(0.7)).value
        assert abs(est.value - ref) <= 4 * est.error_proxy

    def test_bad_counts(self):
        with pytest.raises(ValueError):
            birkhoff_entropy(AlphaMap(0.7), 0, 10, seed=0)


def _synthetic(alphas, values):
    ests = [EntropyEstimate(float(a), float(v), "rohlin") for a, v in zip(alphas, values)]
    return SweepResult(np.asarray(alphas, dtype=float), ests)


class TestSweepTools:
    def test_grid_inclusive(self):
        g = alpha_grid(0.62, 1.0, 0.004)
        assert g.size == 96
        assert g[0] == 0.62 and g[-1] == 1.0

    def test_constant_has_zero_constant(self):
        a = alpha_grid(0.3, 1.0, 0.01)
        fit = holder_fit(_synthetic(a, np.full(a.size, 2.0)), 0.49)
        assert fit.C == 0.0

    def test_holder_of_square_root(self):
        # sqrt|a - 0.5| is exactly 1/2-Hölder with constant 1 over pairs straddling nothing
        a = alpha_grid(0.5, 1.0, 0.01)
        sweep = _synthetic(a, np.sqrt(a - 0.5))
        assert holder_fit(sweep, 0.5).C == pytest.approx(1.0, rel=1e-9)
        fit = holder_fit(sweep, 0.3)
        assert isinstance(fit, HolderFit)
        assert 0.3 < fit.slope < 1.0

    def test_window(self):
        a = alpha_grid(0.0, 1.0, 0.01)
        v = np.where(a < 0.5, 0.0, a - 0.5)
        assert holder_fit(_synthetic(a, v), 1.0, window=(0.0, 0.49)).C == 0.0
        assert holder_fit(_synthetic(a, v), 1.0).C == pytest.approx(1.0)

    def test_exponent_validation(self):
        with pytest.raises(ValueError):
            holder_fit(_synthetic([0.5, 0.6], [1.0, 2.0]), 0.0)

    def test_kink_of_piecewise_linear(self):
        a = alpha_grid(0.5, 0.8, 0.002)
        v = np.where(a < GOLDEN, 3.0 * a, 3.0 * GOLDEN - 2.0 * (a - GOLDEN))
        loc, jump = detect_kink(a, v)
        assert abs(loc - GOLDEN) <= 0.004
        assert jump > 1.0

    def test_monotonicity(self):
        assert monotonicity_changes([1.0, 2.0, 1.5, float("nan"), 3.0, 2.0]) == (1, 2)
        assert monotonicity_changes([1.0, 1.0005, 1.0], threshold=1e-3) == (0, 0)


class TestSweep:
    def test_real_sweep_kink_near_golden_mean(self):
        alphas = alpha_grid(0.58, 0.66, 0.002)
        sweep = sweep_entropy(alphas, SweepConfig(n_cells=1024, workers=2))
        assert not sweep.gaps
        loc, _ = detect_kink(sweep.alphas, sweep.values)
        assert abs(loc - GOLDEN) <= 0.004
        assert set(sweep.fits) == {0.3, 0.45, 0.49}

    def test_parallel_matches_serial(self):
        alphas = alpha_grid(0.5, 0.56, 0.02)
        a = sweep_entropy(alphas, SweepConfig(n_cells=256, workers=1))
        b = sweep_entropy(alphas, SweepConfig(n_cells=256, workers=3))
        np.testing.assert_array_equal(a.values, b.values)

    def test_failures_become_gaps(self):
        sweep = sweep_entropy([0.5, 0.7], SweepConfig(n_cells=256, max_iter=1, workers=1))
        assert sweep.gaps == [0.5, 0.7]
        assert all("error" in e.params for e in sweep.entropies)

    def test_grid_outside_floor(self):
        with pytest.raises(DomainError):
            sweep_entropy([0.01, 0.5])

    def test_outputs(self, tmp_path):
        sweep = sweep_entropy([0.7, 0.72], SweepConfig(n_cells=256, workers=1))
        sweep.to_csv(tmp_path / "s.csv")
        lines = (tmp_path / "s.csv").read_text().splitlines()
        assert lines[0] == "alpha,h_rohlin,err,n_cells,j_max"
        assert len(lines) == 3
        assert lines[1].split(",")[3:] == ["256", "inf"]
        write_fit_json(sweep, tmp_path / "fit.json")
        fits = json.loads((tmp_path / "fit.json").read_text())
        assert [set(f) for f in fits] == [{"s", "C", "residual"}] * 3
