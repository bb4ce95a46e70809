"""Property checks gathered into one suite.

Each check returns a ``Check`` with a name, a pass flag and the measured
quantities, so the suite can be printed by the command line and asserted by
tests alike.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import polygamma

from .continuity import keller_construct
from .mapcore import AlphaMap, _step_array
from .partition import (
    branch_interval,
    branches,
    image_count,
    weight,
    weight_derivative_fd,
    weight_one_variation,
    weight_sup_bound,
)
from .sampling import keyed_uniforms
from .transfer import (
    BKDeltaParams,
    GridFunction,
    _branch_setup,
    bkdelta_norm,
    bv_inequalities_check,
    growth_constant,
    invariant_density,
    transfer_pointwise,
)

_GL8 = np.polynomial.legendre.leggauss(8)

# ceiling for var g_1 independent of alpha: 2 sum 1/j^2 + 2
VAR_G1_CEILING = math.pi**2 / 3.0 + 2.0


@dataclass
class Check:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)


def _sample_points(amap: AlphaMap, count: int, seed: int) -> np.ndarray:
    x = amap.left + keyed_uniforms(seed, 0, count) * amap.length
    return x[x != 0.0]


def check_weight_sup(amap: AlphaMap, n: int, samples: int = 2000, seed: int = 1) -> Check:
    """``g_k(x) <= sup bound`` at sampled points for every ``k <= n``."""
    x = _sample_points(amap, samples, seed)
    worst = 0.0
    for k in range(1, n + 1):
        vals = np.array([weight(amap, k, xi) for xi in x])
        worst = max(worst, float(vals.max() / weight_sup_bound(amap, k)))
    return Check("weight_sup", worst <= 1.0, {"max_ratio": worst, "n": n})


def check_weight_derivative(amap: AlphaMap, n: int, samples: int = 400, seed: int = 2,
                            tol: float = 0.05) -> Check:
    """``|g_k'| <= 2/(1 - gamma)`` by central differences inside cylinders (alpha < 1)."""
    if amap.gamma >= 1.0:
        return Check("weight_derivative", True, {"skipped": "gamma = 1"})
    bound = 2.0 / (1.0 - amap.gamma)
    x = _sample_points(amap, samples, seed)
    worst, used = 0.0, 0
    for k in range(1, n + 1):
        for xi in x:
            d = weight_derivative_fd(amap, k, float(xi))
            if d is not None:
                used += 1
                worst = max(worst, abs(d))
    return Check("weight_derivative", worst <= bound * (1 + tol), {"max": worst, "bound": bound, "points": used})


def check_image_count(amap: AlphaMap, n: int) -> Check:
    counts = [image_count(amap, k) for k in range(1, n + 1)]
    ok = all(c <= 2 * k + 1 for k, c in enumerate(counts, start=1))
    return Check("image_count", ok, {"counts": counts})


def check_var_g1(amap: AlphaMap) -> Check:
    v = weight_one_variation(amap)
    return Check("var_g1", v <= VAR_G1_CEILING, {"var": v, "ceiling": VAR_G1_CEILING})


def _gl(func, a, b, pieces=8):
    nodes, weights = _GL8
    total = 0.0
    edges = np.linspace(a, b, pieces + 1)
    for lo, hi in zip(edges[:-1], edges[1:]):
        x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
        total += 0.5 * (hi - lo) * float(np.dot(weights, func(x)))
    return total


def duality_sides(amap: AlphaMap, f, g, j_max: int = 20000) -> tuple[float, float]:
    """``int Phi(f) g`` and ``int f (g o T)`` computed independently.

    The left side integrates the pointwise branch sum piecewise between the
    points where a truncated branch starts to contribute.  The right side
    integrates ``f (g o T)`` branch by branch up to ``j_max`` and adds the
    remaining branches through ``f(0) int g`` times their trigamma weight.
    """
    cuts = {amap.left, amap.right}
    for eps in (1, -1):
        setup = _branch_setup(amap, eps)
        if setup is not None and amap.left < setup[2] < amap.right:
            cuts.add(setup[2])
    cuts = sorted(cuts)
    lhs = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        lhs += _gl(lambda y: transfer_pointwise(amap, f, y, j_max=j_max // 2) * g(y), a, b)

    alpha = amap.alpha
    rhs = 0.0
    for bid in branches(amap, j_max):
        lo, hi = branch_interval(amap, bid)
        rhs += _gl(lambda x: f(x) * g(_step_array(alpha, x)), lo, hi, pieces=1)
    sides = 1 if amap.j_min_neg is None else 2
    int_g = _gl(g, amap.left, amap.right)
    rhs += sides * float(f(np.array([0.0]))[0]) * int_g * float(polygamma(1, j_max + 1 + alpha - 0.5))
    return lhs, rhs


def check_duality(amap: AlphaMap, tol: float = 1e-5) -> Check:
    f = lambda x: 1.0 + np.asarray(x) ** 2  # noqa: E731
    g = lambda y: np.cos(2.0 * np.asarray(y))  # noqa: E731
    lhs, rhs = duality_sides(amap, f, g)
    return Check("duality", abs(lhs - rhs) <= tol, {"lhs": lhs, "rhs": rhs, "diff": abs(lhs - rhs)})


def check_density_positive(amap: AlphaMap, n_cells: int = 1024, threshold: float = 1e-3) -> Check:
    rho = invariant_density(amap, n_cells)
    m = float(rho.values.min())
    return Check("density_positive", m >= threshold, {"min": m, "threshold": threshold})


def check_keller(amap: AlphaMap, radii=(0.001, 0.01, 0.02)) -> Check:
    rows = []
    ok = True
    for r in radii:
        for beta in (amap.alpha - r, amap.alpha + r):
            if not 0.0 < beta <= 1.0:
                continue
            c = keller_construct(amap.alpha, beta)
            d = abs(amap.alpha - beta)
            good = (c.sup_displacement <= 2 * d and c.agreement_measure >= 1 - 2 * math.sqrt(d) - 1e-12
                    and c.sup_derivative_defect <= c.derivative_bound and c.conjugation_residual <= 1e-10)
            ok &= good
            rows.append({"beta": beta, "kappa": c.kappa, "ok": good})
    return Check("keller", ok, {"pairs": rows})


def check_growth_bound(amap: AlphaMap, delta: float = 0.4, n_cells: int = 4096) -> Check:
    """``|f(x)| <= A |x|^-delta ||f||_{K,delta}`` for ``f = log|x|`` on resolved cells."""
    bound = 1.0 / amap.alpha if amap.alpha >= 1.0 else max(1.0 / amap.alpha, 1.0 / (1.0 - amap.alpha))
    K = max(int(math.floor(bound)) + 1, 2)
    params = BKDeltaParams(K, delta, k_max=max(K + 1, n_cells // 8))
    f = GridFunction.from_function(amap, n_cells, lambda x: np.log(np.abs(x)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        norm = bkdelta_norm(f, params)
    A = growth_constant(amap, params)
    c = f.centers
    far = np.abs(c) >= 1.0 / (params.k_max + amap.alpha)
    ratio = np.abs(f.values[far]) * np.abs(c[far]) ** delta / (A * norm.value)
    worst = float(ratio.max())
    return Check("growth_bound", worst <= 1.0 and norm.stabilized,
                 {"K": K, "norm": norm.value, "A": A, "max_ratio": worst, "stabilized": norm.stabilized})


def check_bv_inequalities(amap: AlphaMap, n_cells: int = 1024, trials: int = 50, seed: int = 3) -> Check:
    J = (amap.left + 0.1, amap.right - 0.1)
    results = [bv_inequalities_check(GridFunction.from_function(amap, n_cells, lambda x: x * x),
                                     GridFunction.constant(amap, n_cells), J).all_hold]
    u = keyed_uniforms(seed, 0, trials * 12)
    e = np.linspace(amap.left, amap.right, 5)
    for t in range(trials):
        a = u[12 * t: 12 * t + 5] * 4 - 2
        b = u[12 * t + 5: 12 * t + 10] * 4 - 2
        f = GridFunction.from_function(amap, n_cells, lambda x: np.interp(x, e, a))
        g = GridFunction.from_function(amap, n_cells, lambda x: np.interp(x, e, b))
        results.append(bv_inequalities_check(f, g, J).all_hold)
    return Check("bv_inequalities", all(results), {"cases": len(results), "failures": results.count(False)})


def run_suite(amap: AlphaMap, n: int = 4, keller: bool = True) -> list[Check]:
    """Every check at one parameter; Keller pairs are skipped at alpha = 1."""
    checks = [
        check_weight_sup(amap, n),
        check_weight_derivative(amap, n),
        check_image_count(amap, n),
        check_var_g1(amap),
        check_duality(amap),
        check_density_positive(amap),
        check_growth_bound(amap),
        check_bv_inequalities(amap),
    ]
    if keller and amap.alpha < 1.0:
        checks.append(check_keller(amap))
    return checks
