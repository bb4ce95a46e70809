"""Birkhoff-sum statistics: empirical CLT, limit variance and the perturbed operator.

The limit variance ``sigma^2`` of an observable ``f`` is estimated three
ways:

* ``variance_mn``: Monte Carlo second moment ``M_n`` of the centred,
  ``sqrt(n)``-normalised Birkhoff sums, for a ladder of ``n``;
* ``variance_green_kubo``: the autocorrelation series, with lag terms
  obtained by pushing ``f_hat * rho`` through the Ulam operator;
* ``eigen_second_derivative``: ``lambda''(0)`` of the perturbed operator
  ``g -> Phi(exp(theta f) g)``.

On the grid, the perturbed operator is ``P^T diag(w_theta)`` where
``w_theta`` holds the cell averages of ``exp(theta (f - c))``.  Its second
derivative at 0 is exactly the discrete Green-Kubo sum, so the last two
estimators agree up to finite-difference error, while ``M_n`` is an
independent check by simulation.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .entropy import parallel_map, worker_count
from .mapcore import AlphaMap
from .observables import Observable, get_observable
from .sampling import sampled_birkhoff_sums
from .transfer import ConvergenceError, GridFunction, invariant_density, ulam_matrix

KS_C01 = 1.63


@dataclass
class CLTSample:
    alpha: float
    observable: str
    n: int
    m: int
    seed: int
    normalized_sums: np.ndarray
    center: float

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample_index", "normalized_sum"])
            for i, v in enumerate(self.normalized_sums):
                w.writerow([i, repr(float(v))])


@dataclass(frozen=True)
class VarianceEstimate:
    alpha: float
    method: str
    value: float
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    critical: float
    passed: bool
    diagnostic: str = ""


def _as_observable(f) -> Observable:
    if isinstance(f, Observable):
        return f
    if isinstance(f, str):
        return get_observable(f)
    if callable(f):
        return Observable(f, getattr(f, "__name__", "f"))
    raise TypeError(f"cannot use {f!r} as an observable")


def _density(amap, density, n_cells):
    return density if density is not None else invariant_density(amap, n_cells)


def observable_mean(f, density: GridFunction) -> float:
    """``int f dmu`` with the density's cell masses and exact or quadrature cell averages."""
    f = _as_observable(f)
    return float(np.dot(density.values, f.cell_averages(density.edges)) * density.h)


# ----------------------------------------------------------------------------
# sampling


def birkhoff_samples(amap: AlphaMap, f, n: int, m: int, seed: int,
                     density: GridFunction | None = None, n_cells: int = 4096) -> CLTSample:
    """``m`` samples of ``(S_n f - n int f dmu)/sqrt(n)`` from seeds drawn from ``mu``."""
    f = _as_observable(f)
    density = _density(amap, density, n_cells)
    center = observable_mean(f, density)
    if f.is_constant:
        sums = np.full(m, f.value * n)
    else:
        sums = sampled_birkhoff_sums(amap, n, m, seed, f, density=density)[0]
    normalized = (sums - n * center) / math.sqrt(n)
    if f.is_constant:
        normalized = np.zeros(m)
    return CLTSample(amap.alpha, f.name, n, m, seed, normalized, center)


def normality_test(sample, sigma: float, level_constant: float = KS_C01) -> KSResult:
    """Kolmogorov-Smirnov test of the sample against Normal(0, sigma^2).

    Passes iff ``D < level_constant / sqrt(m)``; the default constant is the
    asymptotic 1% critical value.  ``sample`` may be a CLTSample or an array.
    """
    x = np.asarray(getattr(sample, "normalized_sums", sample), dtype=float)
    m = x.size
    crit = level_constant / math.sqrt(m)
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    if m < 2 or np.ptp(x) == 0.0:
        return KSResult(1.0, crit, False, "degenerate sample: zero spread")
    d = float(stats.kstest(x, "norm", args=(0.0, sigma)).statistic)
    return KSResult(d, crit, d < crit)


def ks_calibration(runs: int = 100, m: int = 10000, seed: int = 0) -> float:
    """Pass rate of ``normality_test`` on i.i.d. standard Gaussian samples."""
    passes = 0
    for r in range(runs):
        gen = np.random.Generator(np.random.Philox(key=seed + (r << 64)))
        passes += normality_test(gen.standard_normal(m), 1.0).passed
    return passes / runs


# ----------------------------------------------------------------------------
# variance estimators


def variance_mn(amap: AlphaMap, f, ns=(250, 500, 1000, 2000), m: int = 20000, seed: int = 0,
                density: GridFunction | None = None, n_cells: int = 4096) -> VarianceEstimate:
    """Monte Carlo ``M_n`` for each ``n`` in the ladder; the value is ``M_n`` at the largest ``n``.

    Sums are centred with ``int f dmu`` from the density, not the sample mean.
    """
    f = _as_observable(f)
    density = _density(amap, density, n_cells)
    ns = sorted(int(k) for k in ns)
    if f.is_constant:
        ladder = {k: 0.0 for k in ns}
    else:
        center = observable_mean(f, density)
        sums = sampled_birkhoff_sums(amap, ns[-1], m, seed, f, density=density, checkpoints=ns)
        ladder = {k: float(np.mean((sums[i] - k * center) ** 2) / k) for i, k in enumerate(ns)}
    value = ladder[ns[-1]]
    stderr = value * math.sqrt(2.0 / m)
    return VarianceEstimate(amap.alpha, "mn", value, {"ladder": ladder, "m": m, "seed": seed, "stderr": stderr})


@dataclass(frozen=True)
class _Discrete:
    """Grid data shared by the operator-based estimators."""

    op: object
    masses: np.ndarray
    f_bar: np.ndarray
    center: float


def _discretize(amap, f, density, n_cells):
    f = _as_observable(f)
    density = _density(amap, density, n_cells)
    op = ulam_matrix(amap, density.n_cells)
    masses = density.values * density.h
    f_bar = f.cell_averages(density.edges)
    return f, density, _Discrete(op, masses, f_bar, float(np.dot(masses, f_bar)))


def lag_covariances(amap: AlphaMap, f, k_max: int = 200, density: GridFunction | None = None,
                    n_cells: int = 4096) -> tuple[float, np.ndarray]:
    """``(C_0, [C_1, ..., C_kmax])`` for the centred observable on the grid."""
    f, density, d = _discretize(amap, f, density, n_cells)
    fh = d.f_bar - d.center
    c0 = float(np.dot(d.masses, f.cell_square_averages(density.edges, d.center)))
    pt = d.op.matrix.T.tocsr()
    v = d.masses * fh
    lags = np.empty(k_max)
    for k in range(k_max):
        v = pt @ v
        lags[k] = np.dot(v, fh)
    return c0, lags


def fit_geometric(values, floor: float = 1e-14):
    """Least-squares fit ``|values[k]| ~ C lam^(k+1)``; None if fewer than 3 usable terms."""
    a = np.abs(np.asarray(values, dtype=float))
    k = np.arange(1, a.size + 1)
    use = a > floor
    if use.sum() < 3:
        return None
    slope, icpt = np.polyfit(k[use], np.log(a[use]), 1)
    return float(math.exp(icpt)), float(math.exp(slope))


def variance_green_kubo(amap: AlphaMap, f, density: GridFunction | None = None, k_max: int = 200,
                        n_cells: int = 4096) -> VarianceEstimate:
    """``C_0 + 2 sum_{k<=k_max} C_k`` plus a geometric tail fitted to the last lags."""
    f = _as_observable(f)
    if f.is_constant:
        return VarianceEstimate(amap.alpha, "green_kubo", 0.0, {"k_max": k_max, "tail": 0.0, "lambda": 0.0})
    c0, lags = lag_covariances(amap, f, k_max, density, n_cells)
    value = c0 + 2.0 * lags.sum()
    scale = max(abs(c0), 1e-300)
    fit = fit_geometric(lags[: max(3, k_max // 2)], floor=1e-13 * scale)
    tail, lam = 0.0, float("nan")
    if fit is not None:
        C, lam = fit
        if lam < 1.0:
            tail = 2.0 * C * lam ** (k_max + 1) / (1.0 - lam)
    if abs(lags[-1]) > 1e-6 * scale:
        warnings.warn(f"lag covariances have not decayed by k_max={k_max} (last term {lags[-1]:.3e})",
                      RuntimeWarning, stacklevel=2)
    return VarianceEstimate(amap.alpha, "green_kubo", float(value + tail),
                            {"k_max": k_max, "tail": tail, "lambda": lam, "c0": c0})


@dataclass(frozen=True)
class PerturbedOperator:
    """The grid operator ``m -> P^T (w_theta * m)`` acting on cell masses."""

    base: object
    observable: Observable
    theta: float
    shift: float = 0.0

    @property
    def weights(self) -> np.ndarray:
        edges = np.linspace(self.base.amap.left, self.base.amap.right, self.base.n_cells + 1)
        if self.theta == 0.0:
            return np.ones(self.base.n_cells)
        return self.observable.cell_exp_averages(edges, self.theta, self.shift)

    def apply(self, masses) -> np.ndarray:
        return self.base.push(self.weights * masses)


def _leading_eigenvalue(pt, w, v0, tol=1e-14, max_iter=5000):
    v = v0 / np.abs(v0).sum()
    lam_old = np.inf
    for it in range(max_iter):
        u = pt @ (w * v)
        lam = np.abs(u).sum()
        u /= lam
        if abs(lam - lam_old) < tol * lam and np.abs(u - v).sum() < 1e-12:
            return float(lam), u
        v, lam_old = u, lam
    raise ConvergenceError(f"perturbed power iteration stagnated (|dlambda|={abs(lam - lam_old):.2e})",
                           abs(lam - lam_old))


def perturbed_eigenvalue(amap: AlphaMap, f, theta: float, n_cells: int = 4096, shift: float = 0.0,
                         density: GridFunction | None = None) -> float:
    """Leading eigenvalue of the discretised ``g -> Phi(exp(theta (f - shift)) g)``."""
    f = _as_observable(f)
    op = ulam_matrix(amap, n_cells)
    pop = PerturbedOperator(op, f, theta, shift)
    v0 = density.values if density is not None else np.ones(n_cells)
    lam, _ = _leading_eigenvalue(op.matrix.T.tocsr(), pop.weights, np.asarray(v0, float))
    return lam


def _eigen_derivatives(amap, f, n_cells, shift, density, h1=1e-3, h2=2e-2):
    """Central-difference ``lambda'(0)`` and five-point ``lambda''(0)``, both Richardson-extrapolated."""
    op = ulam_matrix(amap, n_cells)
    pt = op.matrix.T.tocsr()
    edges = np.linspace(amap.left, amap.right, n_cells + 1)
    v0 = density.values if density is not None else np.ones(n_cells)
    cache = {}

    def lam(t):
        if t not in cache:
            w = np.ones(n_cells) if t == 0.0 else f.cell_exp_averages(edges, t, shift)
            cache[t] = _leading_eigenvalue(pt, w, v0)[0]
        return cache[t]

    def d1(h):
        return (lam(h) - lam(-h)) / (2 * h)

    def d2(h):
        return (-lam(2 * h) + 16 * lam(h) - 30 * lam(0.0) + 16 * lam(-h) - lam(-2 * h)) / (12 * h * h)

    first = (4 * d1(h1 / 2) - d1(h1)) / 3
    second = (16 * d2(h2 / 2) - d2(h2)) / 15
    return first, second, {"d2_coarse": d2(h2), "d2_fine": d2(h2 / 2), "lambda0": lam(0.0)}


def eigen_first_derivative(amap: AlphaMap, f, n_cells: int = 4096, density=None) -> float:
    """``lambda'(0)`` for the uncentred observable; equals ``int f dmu`` on the grid."""
    f = _as_observable(f)
    return _eigen_derivatives(amap, f, n_cells, 0.0, density)[0]


def variance_eigen(amap: AlphaMap, f, n_cells: int = 4096, density: GridFunction | None = None) -> VarianceEstimate:
    """``lambda''(0)`` of the perturbed operator for the centred observable."""
    f = _as_observable(f)
    if f.is_constant:
        return VarianceEstimate(amap.alpha, "eigen_second_derivative", 0.0, {"n_cells": n_cells})
    density = _density(amap, density, n_cells)
    center = observable_mean(f, density)
    _, second, diag = _eigen_derivatives(amap, f, n_cells, center, density)
    return VarianceEstimate(amap.alpha, "eigen_second_derivative", float(second), {"n_cells": n_cells, **diag})


# ----------------------------------------------------------------------------
# sweeps


def _sigma_task(args):
    alpha, tag, n_cells, k_max = args
    try:
        amap = AlphaMap(alpha)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = variance_green_kubo(amap, get_observable(tag), k_max=k_max, n_cells=n_cells)
        return alpha, est.value, ""
    except (ConvergenceError, ValueError) as exc:
        return alpha, float("nan"), str(exc)


def sigma_sweep(alphas, observable: str = "x", n_cells: int = 1024, k_max: int = 200,
                workers: int | None = None) -> list[tuple[float, float, str]]:
    """``sigma^2_alpha`` by Green-Kubo on each alpha; failures become NaN rows with a message.

    The observable is re-centred for every alpha.
    """
    tasks = [(float(a), observable, n_cells, k_max) for a in alphas]
    return parallel_map(_sigma_task, tasks, worker_count(workers))


def max_adjacent_jump(values) -> float:
    v = np.asarray(values, dtype=float)
    d = np.abs(np.diff(v))
    return float(np.nanmax(d))


def write_variance_csv(estimates, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "method", "value", "params"])
        for e in estimates:
            w.writerow([repr(float(e.alpha)), e.method, repr(float(e.value)), json.dumps(e.params, sort_keys=True)])
