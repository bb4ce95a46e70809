"""Quantitative continuity in the parameter.

All maps are moved to the common interval [0, 1] by translation,
``T~_alpha(x) = T_alpha(x + alpha - 1) + 1 - alpha``.  This module builds
the explicit near-conjugacy between two translated maps and measures how
far it is from the identity (a bound on their Keller distance), probes the
Lasota-Yorke inequality empirically, fits the decay of correlations and
tabulates how translated invariant densities move with the parameter.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .mapcore import AlphaMap, DomainError, _step_array
from .transfer import invariant_density, ulam_matrix

KELLER_GUARD = 0.02
KELLER_GRID = 10001


@dataclass(frozen=True)
class TranslatedMap:
    alpha: float

    def __call__(self, x):
        a = self.alpha
        x = np.asarray(x, dtype=float)
        return _step_array(a, x + a - 1.0) + 1.0 - a

    def density(self, n_cells: int = 4096) -> np.ndarray:
        """Cell values of the translated density on the uniform grid of [0, 1]."""
        # the grid of [alpha - 1, alpha] has unit length, so cells translate one to one
        return invariant_density(AlphaMap(self.alpha), n_cells).values


def _circular(d):
    """Distance on [0, 1] with 0 and 1 identified.

    Orbit points on a digit boundary may land on either end of the interval.
    """
    d = np.abs(d) % 1.0
    return np.minimum(d, 1.0 - d)


@dataclass(frozen=True)
class KellerCertificate:
    alpha: float
    beta: float
    delta: float
    sup_displacement: float
    sup_derivative_defect: float
    agreement_measure: float
    kappa: float
    conjugation_residual: float = 0.0
    bridge: str = "sqrt"
    y_displacement: float = 0.0

    def to_json(self) -> str:
        keys = ("alpha", "beta", "delta", "sup_displacement", "sup_derivative_defect", "agreement_measure", "kappa")
        return json.dumps({k: getattr(self, k) for k in keys}, indent=2)

    def as_dict(self) -> dict:
        return asdict(self)

    @property
    def derivative_bound(self) -> float:
        """``max{3|a - b|, s/(delta - s)}`` with ``s = sup|y(x) - x|``.

        The first term bounds ``|1/y' - 1|`` on the middle piece; the second
        bounds the bridges because ``|y(delta)| >= delta - s``.  When
        ``delta^2 = s`` the second term is ``delta/(1 - delta)``.
        """
        r = abs(self.alpha - self.beta)
        if r == 0.0:
            return 0.0
        s = self.y_displacement
        return max(3.0 * r, s / (self.delta - s)) if self.delta > s else math.inf


class ConstructionError(ValueError):
    """The bridged map is not monotone on the evaluation grid."""


def _y(alpha, beta, x):
    u = x + alpha - 1.0
    return u / (1.0 + (beta - alpha) * np.abs(u)) + 1.0 - beta


def _dy(alpha, beta, x):
    u = x + alpha - 1.0
    return 1.0 / (1.0 + (beta - alpha) * np.abs(u)) ** 2


def _conjugation_residual(alpha, beta, x):
    """max |T~_alpha(x) - T~_beta(y(x))| over the points ``x``.

    Both sides are evaluated from the same untranslated point
    ``u = x + alpha - 1``; translating ``y(x)`` back would lose about
    ``eps/|u|^2`` to cancellation near 0.  The point ``u = 0`` (preimage of
    the fixed point 0, where ``T(0) = 0`` breaks the identity) is skipped.
    """
    u = x + alpha - 1.0
    u = u[u != 0.0]
    if u.size == 0:
        return 0.0
    v = u / (1.0 + (beta - alpha) * np.abs(u))
    lhs = _step_array(alpha, u) + 1.0 - alpha
    rhs = _step_array(beta, v) + 1.0 - beta
    return float(np.max(_circular(lhs - rhs)))


def keller_construct(alpha: float, beta: float, guard: float = KELLER_GUARD,
                     grid: int = KELLER_GRID, bridge: str = "sqrt") -> KellerCertificate:
    """Near-conjugacy ``sigma`` with ``T~_alpha = T~_beta o sigma`` on a large set.

    ``y(x)`` conjugates the two maps on all of [0, 1] but does not fix the
    endpoints, so it is replaced by linear bridges on ``[0, delta]`` and
    ``[1 - delta, 1]``.  With ``bridge="sqrt"`` (default) the half-width is
    ``|alpha - beta|^(1/2)``; ``bridge="displacement"`` takes
    ``delta^2 = sup|y - x|`` instead, which gives a slightly smaller
    agreement set.  All quantities are measured on a uniform grid, and the
    derivative check skips the two corners.
    """
    AlphaMap(alpha), AlphaMap(beta)
    r = abs(alpha - beta)
    if r > guard * (1.0 + 1e-9):
        raise DomainError(f"|alpha - beta| = {r:g} exceeds the guarded neighbourhood {guard:g}")
    if r == 0.0:
        return KellerCertificate(alpha, beta, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, bridge)
    x = np.linspace(0.0, 1.0, grid)
    y = _y(alpha, beta, x)
    sup_y = float(np.max(np.abs(y - x)))
    if bridge == "sqrt":
        delta = math.sqrt(r)
    elif bridge == "displacement":
        delta = math.sqrt(sup_y)
    else:
        raise ValueError(f"unknown bridge {bridge!r}")
    y_lo, y_hi = float(_y(alpha, beta, delta)), float(_y(alpha, beta, 1.0 - delta))
    left, right = x < delta, x > 1.0 - delta
    sigma = np.where(left, y_lo / delta * x, y)
    sigma = np.where(right, (1.0 - y_hi) / delta * (x - 1.0 + delta) + y_hi, sigma)
    bad = np.flatnonzero(np.diff(sigma) <= 0.0)
    if bad.size or y_lo <= 0.0 or y_hi >= 1.0:
        where = x[bad[0]] if bad.size else (0.0 if y_lo <= 0 else 1.0)
        raise ConstructionError(f"sigma is not increasing near x={where:.6g}")
    dsig = np.where(left, y_lo / delta, np.where(right, (1.0 - y_hi) / delta, _dy(alpha, beta, x)))
    corners = np.isclose(x, delta, atol=0.5 / (grid - 1)) | np.isclose(x, 1.0 - delta, atol=0.5 / (grid - 1))
    defect = float(np.max(np.abs(1.0 / dsig[~corners] - 1.0)))
    # exact endpoint values of the bridges
    defect = max(defect, abs(delta / y_lo - 1.0), abs(delta / (1.0 - y_hi) - 1.0))
    disp = max(float(np.max(np.abs(sigma - x))), abs(y_lo - delta), abs(y_hi - 1.0 + delta))
    resid = _conjugation_residual(alpha, beta, x[~(left | right)])
    agreement = 1.0 - 2.0 * delta
    kappa = max(disp, defect, 1.0 - agreement)
    return KellerCertificate(alpha, beta, delta, disp, defect, agreement, kappa, resid, bridge, sup_y)


def keller_bound_curve(alpha0: float, radii, **kwargs):
    """``[(r, kappa(r))]`` for ``beta = alpha0 + r`` and the log-log slope of kappa."""
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0):
        raise ValueError("radii must be positive")
    kappas = np.array([keller_construct(alpha0, alpha0 + r, **kwargs).kappa for r in radii])
    slope = float(np.polyfit(np.log(radii), np.log(kappas), 1)[0]) if radii.size > 1 else float("nan")
    return list(zip(radii.tolist(), kappas.tolist())), slope


# ----------------------------------------------------------------------------
# Lasota-Yorke probe


def probe_functions(n_cells: int) -> list[np.ndarray]:
    """The fixed probe set on translated coordinates: 4 indicators, 4 sawtooths, 4 trigonometric."""
    t = (np.arange(n_cells) + 0.5) / n_cells
    probes = [((t >= a) & (t < b)).astype(float) for a, b in ((0.0, 0.5), (0.5, 1.0), (0.2, 0.3), (0.1, 0.9))]
    probes += [(k * t) % 1.0 for k in (1, 2, 3, 5)]
    probes += [1.0 + np.cos(2 * np.pi * k * t) for k in (1, 2)] + [1.0 + np.sin(2 * np.pi * k * t) for k in (3, 7)]
    return probes


def _var(v):
    return float(np.abs(np.diff(v)).sum())


@dataclass(frozen=True)
class LasotaYorkeProbe:
    alpha: float
    n_max: int
    lambda_hat: float
    D_hat: float


def lasota_yorke_probe(amap: AlphaMap, n_max: int = 6, test_functions=None, n_cells: int = 1024,
                       j_max: int | None = None) -> LasotaYorkeProbe:
    """Empirical constants in ``var Phi^n f <= lam^n var f + D ||f||_1``.

    ``lambda_hat`` is fixed first: for every probe ``f`` the variation of
    ``Phi^n f - (int f) rho`` is fitted by a geometric sequence in
    ``n = 1..n_max``, and the slowest rate is kept.  ``D_hat`` is then the
    smallest constant making the inequality hold for every probe (plus the
    constant function) and every ``n <= n_max``.
    """
    op = ulam_matrix(amap, n_cells, j_max)
    rho = invariant_density(amap, n_cells, j_max).values
    h = 1.0 / n_cells
    probes = list(test_functions) if test_functions is not None else probe_functions(n_cells)
    probes.append(np.ones(n_cells))
    pt = op.matrix.T.tocsr()
    ns = np.arange(1, n_max + 1)
    runs, lam = [], 0.0
    for f in probes:
        f = np.asarray(f, dtype=float)
        v, mass = f * h, float(f.sum() * h)
        full, centred = [], []
        for _ in ns:
            v = pt @ v
            full.append(_var(v / h))
            centred.append(_var(v / h - mass * rho))
        runs.append((_var(f), float(np.abs(f).sum() * h), full))
        centred = np.array(centred)
        if _var(f) > 0 and np.all(centred > 0) and n_max > 1:
            lam = max(lam, float(np.exp(np.polyfit(ns, np.log(centred), 1)[0])))
    D = 0.0
    for vf, l1, full in runs:
        if l1 > 0:
            D = max(D, max((V - lam**n * vf) / l1 for n, V in zip(ns, full)))
    return LasotaYorkeProbe(amap.alpha, n_max, lam, float(D))


# ----------------------------------------------------------------------------
# correlations and density modulus


@dataclass(frozen=True)
class DecayFit:
    C_hat: float
    lambda_hat: float
    correlations: np.ndarray
    degenerate: bool


def correlation_decay_fit(amap: AlphaMap, f1, f2, n_max: int = 40, n_cells: int = 1024,
                          floor: float = 1e-12) -> DecayFit:
    """Geometric fit of ``|int f1 (f2 o T^n) dmu - int f1 dmu int f2 dmu|``.

    The correlation is taken against the invariant measure: ``f1 rho`` is
    pushed forward ``n`` times and paired with ``f2``, so constant ``f1`` or
    constant ``f2`` gives zero correlations.

    ``f1`` and ``f2`` are callables (sampled at cell centres) or cell-value
    arrays.  Terms below ``floor`` are ignored; fewer than three usable terms
    flag the fit as degenerate.
    """
    op = ulam_matrix(amap, n_cells)
    dens = invariant_density(amap, n_cells)
    c = dens.centers

    def vals(f):
        return np.asarray(f(c) if callable(f) else f, dtype=float) * np.ones(n_cells)

    g1, g2 = vals(f1), vals(f2)
    h = 1.0 / n_cells
    v = g1 * dens.values * h
    base = v.sum() * float(np.dot(dens.values * h, g2))
    pt = op.matrix.T.tocsr()
    corr = np.empty(n_max)
    for n in range(n_max):
        v = pt @ v
        corr[n] = np.dot(v, g2) - base
    a = np.abs(corr)
    k = np.arange(1, n_max + 1)
    use = a > floor * max(1.0, np.abs(g1).max() * np.abs(g2).max())
    if use.sum() < 3:
        return DecayFit(0.0, 0.0, corr, True)
    slope, icpt = np.polyfit(k[use], np.log(a[use]), 1)
    return DecayFit(float(math.exp(icpt)), float(math.exp(slope)), corr, False)


@dataclass(frozen=True)
class ModulusRow:
    r: float
    alpha: float
    l1: float
    bv: float


def density_l1_modulus(alpha0: float, radii, n_cells: int = 4096):
    """L1 and variation distances between translated densities at ``alpha0 + r`` and ``alpha0``.

    Returns the rows and the log-log slope of the L1 distance over the
    nonzero radii.
    """
    base = TranslatedMap(alpha0).density(n_cells)
    h = 1.0 / n_cells
    rows = []
    for r in radii:
        if r == 0:
            rows.append(ModulusRow(0.0, alpha0, 0.0, 0.0))
            continue
        other = TranslatedMap(alpha0 + r).density(n_cells)
        diff = other - base
        rows.append(ModulusRow(float(r), alpha0 + r, float(np.abs(diff).sum() * h), _var(diff)))
    pos = [(abs(x.r), x.l1) for x in rows if x.r != 0 and x.l1 > 0]
    slope = float("nan")
    if len(pos) > 1:
        rr, ll = np.array(pos).T
        slope = float(np.polyfit(np.log(rr), np.log(ll), 1)[0])
    return rows, slope
