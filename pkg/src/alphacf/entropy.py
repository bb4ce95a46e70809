"""Metric entropy of T_alpha.

Two estimators are provided.  ``rohlin_entropy`` integrates
``log|T'| = -2 log|x|`` against a computed invariant density, with the
logarithm integrated exactly on every cell (including the one containing 0).
``birkhoff_entropy`` averages the same observable along sampled orbits.
Sweeps over a grid of parameters run one independent task per alpha.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .mapcore import AlphaMap, DomainError
from .observables import LogDerivative
from .sampling import sampled_birkhoff_sums
from .transfer import ConvergenceError, GridFunction, invariant_density

SWEEP_FLOOR = 0.05
HOLDER_EXPONENTS = (0.3, 0.45, 0.49)


@dataclass(frozen=True)
class EntropyEstimate:
    """An entropy value in nats with the method that produced it.

    ``error_proxy`` is a heuristic size of the error: for ``rohlin`` it is
    ``h * var(rho) * int|log T'|`` (cell width times density variation times
    the L1 norm of the observable), for ``birkhoff`` the standard error of
    the mean over seeds.
    """

    alpha: float
    value: float
    method: str
    params: dict = field(default_factory=dict)
    error_proxy: float = float("nan")

    def as_dict(self) -> dict:
        return asdict(self)


def _int_abs_log(amap: AlphaMap) -> float:
    # int over [alpha-1, alpha] of 2|log|x||; both pieces are in (0, 1]
    total = 0.0
    for b in (amap.alpha, 1.0 - amap.alpha):
        if b > 0:
            total += 2.0 * (b - b * math.log(b))
    return total


def rohlin_entropy(amap: AlphaMap, density: GridFunction) -> EntropyEstimate:
    """``-2 * sum_i rho_i * int_cell log|x| dx`` with exact cell integrals.

    The density is used as given; no invariance is assumed.
    """
    if density.amap != amap:
        raise ValueError("density belongs to a different map")
    f_bar = LogDerivative().cell_averages(density.edges)
    value = float(np.dot(density.values, f_bar) * density.h)
    proxy = density.h * density.total_variation() * _int_abs_log(amap)
    params = {"n_cells": density.n_cells, **{k: v for k, v in density.meta.items() if k != "residual"}}
    return EntropyEstimate(amap.alpha, value, "rohlin", params, proxy)


def birkhoff_entropy(
    amap: AlphaMap,
    n: int,
    m: int,
    seed: int,
    density: GridFunction | None = None,
    lebesgue: bool = False,
    burn_in: int = 1000,
    n_cells: int = 4096,
) -> EntropyEstimate:
    """Mean over ``m`` seeds of ``(1/n) sum_{k<n} -2 log|x_k|``.

    Seeds are drawn from the computed invariant density (by inverse CDF),
    so no burn-in is needed.  With ``lebesgue=True`` they are uniform and
    the first ``burn_in`` steps are discarded instead.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if lebesgue:
        dens, skip = None, burn_in
    else:
        dens = density if density is not None else invariant_density(amap, n_cells)
        skip = 0
    sums = sampled_birkhoff_sums(amap, n, m, seed, LogDerivative(), density=dens, burn_in=skip)[0]
    means = sums / n
    err = float(means.std(ddof=1) / math.sqrt(m)) if m > 1 else float("inf")
    params = {"n": n, "m": m, "seed": seed, "lebesgue": lebesgue}
    return EntropyEstimate(amap.alpha, float(means.mean()), "birkhoff", params, err)


# ----------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepConfig:
    n_cells: int = 1024
    j_max: int | None = None
    tol: float = 1e-12
    max_iter: int = 100000
    workers: int | None = None


def worker_count(requested: int | None = None) -> int:
    """Parallelism: explicit request, else ACF_THREADS, else the CPU count."""
    if requested is None:
        env = os.environ.get("ACF_THREADS")
        requested = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(requested))


def _entropy_task(args):
    alpha, cfg = args
    try:
        amap = AlphaMap(alpha)
        dens = invariant_density(amap, cfg.n_cells, cfg.j_max, cfg.tol, cfg.max_iter)
        est = rohlin_entropy(amap, dens)
        return EntropyEstimate(alpha, est.value, "rohlin", {"n_cells": cfg.n_cells, "j_max": cfg.j_max}, est.error_proxy)
    except (ConvergenceError, DomainError, ValueError) as exc:
        return EntropyEstimate(alpha, float("nan"), "rohlin", {"n_cells": cfg.n_cells, "j_max": cfg.j_max, "error": str(exc)})


def parallel_map(func, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * workers))))


@dataclass(frozen=True)
class HolderFit:
    s: float
    C: float
    residual: float
    slope: float


@dataclass
class SweepResult:
    alphas: np.ndarray
    entropies: list
    config: SweepConfig = field(default_factory=SweepConfig)
    fits: dict = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entropies])

    @property
    def gaps(self) -> list[float]:
        return [e.alpha for e in self.entropies if not np.isfinite(e.value)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha", "h_rohlin", "err", "n_cells", "j_max"])
            for e in self.entropies:
                j = e.params.get("j_max")
                w.writerow([repr(float(e.alpha)), repr(float(e.value)), repr(float(e.error_proxy)),
                            e.params.get("n_cells", ""), "inf" if j is None else j])

    def fits_json(self) -> list[dict]:
        return [{"s": f.s, "C": f.C, "residual": f.residual} for f in self.fits.values()]


def alpha_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive grid ``start, start + step, ..., stop`` without drift."""
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 12)


def sweep_entropy(alphas, config: SweepConfig | None = None) -> SweepResult:
    """Rohlin entropy on every alpha of the grid.

    Failing parameters become NaN gaps; the sweep itself never aborts.
    Hölder constants for the standard exponents are attached to the result.
    """
    config = config or SweepConfig()
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size and (alphas.min() < SWEEP_FLOOR or alphas.max() > 1.0):
        raise DomainError(f"sweep grid must lie in [{SWEEP_FLOOR}, 1]")
    ests = parallel_map(_entropy_task, [(float(a), config) for a in alphas], worker_count(config.workers))
    result = SweepResult(alphas, ests, config)
    for s in HOLDER_EXPONENTS:
        result.fits[s] = holder_fit(result, s)
    return result


def holder_fit(sweep: SweepResult, s: float, window=None) -> HolderFit:
    """Hölder constant ``C = max |h(a) - h(b)| / |a - b|^s`` over all pairs.

    ``residual`` is the RMS residual of the least-squares line through
    ``log|dh|`` against ``log|da|`` over the same pairs, and ``slope`` its
    slope.  ``window`` restricts the pairs to alphas inside an interval.
    """
    if not 0.0 < s:
        raise ValueError("s must be positive")
    a = np.asarray(sweep.alphas, dtype=float)
    h = sweep.values
    keep = np.isfinite(h)
    if window is not None:
        keep &= (a >= window[0]) & (a <= window[1])
    a, h = a[keep], h[keep]
    i, j = np.triu_indices(a.size, k=1)
    da = np.abs(a[i] - a[j])
    dh = np.abs(h[i] - h[j])
    if da.size == 0:
        return HolderFit(s, 0.0, 0.0, float("nan"))
    C = float(np.max(dh / da**s))
    nz = dh > 0
    if nz.sum() < 3:
        return HolderFit(s, C, 0.0, float("nan"))
    x, y = np.log(da[nz]), np.log(dh[nz])
    slope, icpt = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + icpt)) ** 2)))
    return HolderFit(s, C, resid, float(slope))


def detect_kink(alphas, values) -> tuple[float, float]:
    """Location and size of the largest second difference of a sampled curve.

    Returns ``(alpha, jump)`` where ``jump`` is the change of the secant slope
    across ``alpha``.
    """
    a = np.asarray(alphas, dtype=float)
    h = np.asarray(values, dtype=float)
    slopes = np.diff(h) / np.diff(a)
    jumps = np.abs(np.diff(slopes))
    if not np.isfinite(jumps).any():
        raise ValueError("no finite second differences")
    k = int(np.nanargmax(jumps))
    return float(a[k + 1]), float(jumps[k])


def monotonicity_changes(values, threshold: float = 0.0) -> tuple[int, int]:
    """Number of adjacent increases and decreases larger than ``threshold``.

    NaN gaps are skipped.
    """
    h = np.asarray(values, dtype=float)
    d = np.diff(h)
    d = d[np.isfinite(d)]
    return int((d > threshold).sum()), int((d < -threshold).sum())


def write_fit_json(sweep: SweepResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(sweep.fits_json(), fh, indent=2)
        fh.write("\n")
