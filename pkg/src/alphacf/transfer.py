"""Transfer operator on a uniform grid over ``[alpha - 1, alpha]``.

Two discretisations are provided:

* the Ulam matrix ``P[i, k] = m(cell_i & T^-1 cell_k) / m(cell_i)``, which
  acts on vectors of cell masses, and
* the branch-sum matrix, which evaluates
  ``(Phi f)(y) = sum_j f(eps/(y + j)) / (y + j)^2`` at cell centres for a
  piecewise-constant ``f``.

Both are assembled exactly.  Every full branch maps onto the whole
interval, so the contributions of consecutive branches to one cell pair
telescope into differences of the digamma (Ulam) or trigamma (branch sum)
functions; in particular the infinitely many branches accumulating at 0 are
summed in closed form instead of being enumerated.
"""
from __future__ import annotations

import csv
import functools
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import digamma, polygamma

from .mapcore import AlphaMap
from .partition import first_branch, truncation_tail

log = logging.getLogger(__name__)

_ASYMPTOTIC = 1e4
_BLOCK = 128


class ConvergenceError(RuntimeError):
    """Power iteration did not reach the requested tolerance."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


def grid_edges(amap: AlphaMap, n_cells: int) -> np.ndarray:
    e = amap.left + amap.length * np.arange(n_cells + 1) / n_cells
    e[-1] = amap.right
    return e


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Piecewise-constant function on ``n_cells`` uniform cells."""

    amap: AlphaMap
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("values must be a nonempty 1-d array")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, amap: AlphaMap, n_cells: int, func) -> "GridFunction":
        """Sample ``func`` at cell centres."""
        c = grid_edges(amap, n_cells)
        return cls(amap, func(0.5 * (c[:-1] + c[1:])))

    @classmethod
    def constant(cls, amap: AlphaMap, n_cells: int, value: float = 1.0) -> "GridFunction":
        return cls(amap, np.full(n_cells, float(value)))

    @property
    def n_cells(self) -> int:
        return self.values.size

    @property
    def h(self) -> float:
        return self.amap.length / self.n_cells

    @property
    def edges(self) -> np.ndarray:
        return grid_edges(self.amap, self.n_cells)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def integral(self) -> float:
        return float(self.values.sum() * self.h)

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum() * self.h)

    def total_variation(self, sub_interval=None) -> float:
        return total_variation(self, sub_interval)

    def __call__(self, x):
        """Evaluate at points (cell lookup)."""
        i = np.clip(np.floor((np.asarray(x) - self.amap.left) / self.h).astype(int), 0, self.n_cells - 1)
        return self.values[i]

    def with_values(self, values, **meta) -> "GridFunction":
        return GridFunction(self.amap, values, meta)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return self.with_values(self.values - other.values)

    def to_csv(self, path) -> None:
        e = self.edges
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cell_left", "cell_right", "value"])
            for a, b, v in zip(e[:-1], e[1:], self.values):
                w.writerow([repr(float(a)), repr(float(b)), repr(float(v))])

    @classmethod
    def from_csv(cls, amap: AlphaMap, path) -> "GridFunction":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(amap, [float(r["value"]) for r in rows])


# ----------------------------------------------------------------------------
# closed-form branch sums


def _psi_diff(a, b):
    """digamma(b) - digamma(a), accurate for large arguments."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    out = np.empty(a.shape)
    big = np.minimum(a, b) > _ASYMPTOTIC
    sa, sb = a[~big], b[~big]
    out[~big] = digamma(sb) - digamma(sa)
    ba, bb = a[big], b[big]
    out[big] = (
        np.log1p((bb - ba) / ba)
        - 0.5 * (1.0 / bb - 1.0 / ba)
        - (1.0 / (12 * bb * bb) - 1.0 / (12 * ba * ba))
    )
    return out


def _trigamma(x):
    return polygamma(1, x)


def _branch_setup(amap: AlphaMap, eps: int):
    """First digit on one side, whether that branch is full, and where its image starts."""
    j0 = first_branch(amap, eps)
    if j0 is None:
        return None
    bound = amap.alpha if eps > 0 else 1.0 - amap.alpha
    y0 = 1.0 / bound - j0
    return j0, y0 <= amap.left, y0


def _ulam_cumulative(t, d, e, amap, eps, j_max):
    """Mass of ``{x : sign x = eps, |x| <= t, T x in [d, e]}``.

    ``t`` has shape (1, m); ``d`` and ``e`` have shape (K, 1).
    """
    setup = _branch_setup(amap, eps)
    shape = np.broadcast_shapes(t.shape, d.shape)
    if setup is None:
        return np.zeros(shape)
    j0, full0, y0 = setup
    jf = j0 if full0 else j0 + 1
    jtop = np.inf if j_max is None else float(j_max)
    pos = t > 0
    with np.errstate(divide="ignore"):
        m = np.where(pos, np.ceil(1.0 / np.where(pos, t, 1.0) - d), np.inf)
    m = np.maximum(m, jf)
    m = np.broadcast_to(m, shape)
    dd = np.broadcast_to(d, shape)
    ee = np.broadcast_to(e, shape)
    tt = np.broadcast_to(t, shape)
    out = np.zeros(shape)
    ok = np.isfinite(m) & (m <= jtop)
    out[ok] = _psi_diff(dd[ok] + m[ok], ee[ok] + m[ok])
    if np.isfinite(jtop):
        cut = ok
        out[cut] -= _psi_diff(dd[cut] + jtop + 1, ee[cut] + jtop + 1)
    # branch m - 1 straddles t
    prev = np.where(np.isfinite(m), m - 1, np.inf)
    part = (prev >= jf) & (prev <= jtop)
    if np.any(part):
        pm = prev[part]
        out[part] += np.maximum(0.0, tt[part] - 1.0 / (ee[part] + pm))
    if not full0 and j0 <= jtop:
        lo_y = np.maximum(d, y0)
        valid = lo_y < e
        lo = 1.0 / (e + j0)
        hi = 1.0 / (np.where(valid, lo_y, e) + j0)
        out += np.where(valid, np.clip(t - lo, 0.0, np.maximum(hi - lo, 0.0)), 0.0)
    return out


def _branch_sum_cumulative(t, y, amap, eps, j_max):
    """``sum 1/(y + j)^2`` over admissible branches with ``1/(y + j) <= t``."""
    setup = _branch_setup(amap, eps)
    shape = np.broadcast_shapes(t.shape, y.shape)
    if setup is None:
        return np.zeros(shape)
    j0, _, y0 = setup
    jstart = np.where(y >= y0, j0, j0 + 1)
    jtop = np.inf if j_max is None else float(j_max)
    pos = t > 0
    with np.errstate(divide="ignore"):
        m = np.where(pos, np.ceil(1.0 / np.where(pos, t, 1.0) - y), np.inf)
    m = np.broadcast_to(np.maximum(m, jstart), shape)
    yy = np.broadcast_to(y, shape)
    out = np.zeros(shape)
    ok = np.isfinite(m) & (m <= jtop)
    out[ok] = _trigamma(yy[ok] + m[ok])
    if np.isfinite(jtop):
        out[ok] -= _trigamma(yy[ok] + jtop + 1)
    return out


def _source_thresholds(edges):
    tp = np.maximum(edges, 0.0)
    tn = np.maximum(-edges, 0.0)
    return tp, tn


@dataclass(frozen=True, eq=False)
class UlamOperator:
    """Ulam matrix of T on a uniform grid (row-stochastic up to truncation)."""

    amap: AlphaMap
    n_cells: int
    j_max: int | None
    matrix: sp.csr_matrix
    tail_mass: float

    @property
    def h(self) -> float:
        return self.amap.length / self.n_cells

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def push(self, masses) -> np.ndarray:
        """Transport a vector of cell masses one step forward."""
        return self.matrix.T @ masses

    def apply(self, f: GridFunction) -> GridFunction:
        """Cell averages of ``Phi f`` for a piecewise-constant ``f``."""
        return f.with_values(self.push(f.values))

    def leading_eigenvalue(self) -> float:
        from scipy.sparse.linalg import eigs

        vals = eigs(self.matrix.T.tocsc(), k=1, which="LM", return_eigenvectors=False)
        return float(abs(vals[0]))


def _assemble(n_cells, column_block):
    rows, cols, vals = [], [], []
    for k0 in range(0, n_cells, _BLOCK):
        k1 = min(n_cells, k0 + _BLOCK)
        block = column_block(k0, k1)  # shape (k1 - k0, n_cells): [target, source]
        block[block < 0.0] = 0.0
        kk, ii = np.nonzero(block)
        rows.append(ii)
        cols.append(kk + k0)
        vals.append(block[kk, ii])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_cells, n_cells))


@functools.lru_cache(maxsize=16)
def ulam_matrix(amap: AlphaMap, n_cells: int, j_max: int | None = None) -> UlamOperator:
    """Assemble the Ulam matrix.

    ``j_max=None`` sums every branch in closed form.  A finite ``j_max``
    drops the branches beyond it; the dropped Lebesgue measure is reported
    as ``tail_mass``.
    """
    if n_cells < 2:
        raise ValueError("n_cells must be at least 2")
    edges = grid_edges(amap, n_cells)
    h = amap.length / n_cells
    tp, tn = _source_thresholds(edges)
    tp, tn = tp[None, :], tn[None, :]

    def column_block(k0, k1):
        d = edges[k0:k1, None]
        e = edges[k0 + 1 : k1 + 1, None]
        fp = _ulam_cumulative(tp, d, e, amap, 1, j_max)
        fn = _ulam_cumulative(tn, d, e, amap, -1, j_max)
        return (np.diff(fp, axis=1) - np.diff(fn, axis=1)) / h

    mat = _assemble(n_cells, column_block)
    tail = 0.0 if j_max is None else truncation_tail(amap, j_max)
    return UlamOperator(amap, n_cells, j_max, mat, tail)


@functools.lru_cache(maxsize=16)
def branch_sum_matrix(amap: AlphaMap, n_cells: int, j_max: int | None = None) -> sp.csr_matrix:
    """Matrix ``B`` with ``(Phi f)(y_k) = sum_i B[k, i] f_i`` at cell centres ``y_k``."""
    edges = grid_edges(amap, n_cells)
    centers = 0.5 * (edges[:-1] + edges[1:])
    tp, tn = _source_thresholds(edges)
    tp, tn = tp[None, :], tn[None, :]

    def column_block(k0, k1):
        y = centers[k0:k1, None]
        gp = _branch_sum_cumulative(tp, y, amap, 1, j_max)
        gn = _branch_sum_cumulative(tn, y, amap, -1, j_max)
        return np.diff(gp, axis=1) - np.diff(gn, axis=1)

    return _assemble(n_cells, column_block).T.tocsr()


def apply_transfer(f: GridFunction, j_max: int | None = None) -> GridFunction:
    """Branch-sum transfer operator evaluated at the cell centres."""
    b = branch_sum_matrix(f.amap, f.n_cells, j_max)
    return f.with_values(b @ f.values)


def transfer_pointwise(amap: AlphaMap, func, y, j_max: int = 10000) -> np.ndarray:
    """``(Phi func)(y)`` for a callable, with branches beyond ``j_max`` lumped.

    The lumped tail uses ``func`` at the last enumerated preimage times the
    exact trigamma tail weight.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.zeros_like(y)
    for eps in (1, -1):
        setup = _branch_setup(amap, eps)
        if setup is None:
            continue
        j0, _, y0 = setup
        js = np.arange(j0, j_max + 1, dtype=float)
        for idx, yv in enumerate(y):
            jj = js if yv >= y0 else js[1:]
            x = eps / (yv + jj)
            out[idx] += np.sum(func(x) / (yv + jj) ** 2)
            out[idx] += func(np.array([eps / (yv + j_max + 1)]))[0] * _trigamma(yv + j_max + 1)
    return out


# ----------------------------------------------------------------------------
# invariant density


def _power_iteration(apply, v0, tol, max_iter, norm_h):
    v = v0 / (np.abs(v0).sum() * norm_h)
    res = np.inf
    for it in range(1, max_iter + 1):
        w = apply(v)
        w = w / (np.abs(w).sum() * norm_h)
        res = np.abs(w - v).sum() * norm_h
        v = w
        if res < tol:
            return v, it, res
    raise ConvergenceError(f"power iteration stalled after {max_iter} steps (residual {res:.3e})", res)


def invariant_density(
    amap: AlphaMap,
    n_cells: int = 4096,
    j_max: int | None = None,
    tol: float = 1e-12,
    max_iter: int = 100000,
    realization: str = "ulam",
) -> GridFunction:
    """Normalised fixed point of the discretised transfer operator.

    ``realization`` selects the Ulam matrix (default) or the branch-sum
    matrix.  Raises ConvergenceError with the last residual on failure.
    """
    h = amap.length / n_cells
    if realization == "ulam":
        op = ulam_matrix(amap, n_cells, j_max)
        pt = op.matrix.T.tocsr()

        def apply(v):
            return pt @ v

    elif realization == "branch_sum":
        b = branch_sum_matrix(amap, n_cells, j_max)

        def apply(v):
            return b @ v

    else:
        raise ValueError(f"unknown realization {realization!r}")
    v, it, res = _power_iteration(apply, np.ones(n_cells), tol, max_iter, h)
    log.debug("density alpha=%g cells=%d: %d iterations, residual %.2e", amap.alpha, n_cells, it, res)
    return GridFunction(amap, v, {"iterations": it, "residual": res, "realization": realization})


def translated(f: GridFunction) -> np.ndarray:
    """Values of ``x -> f(x + alpha - 1)`` on the same cells shifted to [0, 1]."""
    return f.values


def gauss_density(x):
    return 1.0 / (math.log(2.0) * (1.0 + np.asarray(x)))


def closed_form_density_translated(alpha: float, y):
    """Invariant density on [0, 1] (translated coordinates) for alpha >= golden mean.

    Breakpoint at ``(1 - alpha^2)/alpha``; left of it the density is
    ``1/(x + 2)`` and right of it ``1/(x + 1)`` in the original coordinate
    ``x = y + alpha - 1``, normalised by ``log(1 + alpha)``.
    """
    y = np.asarray(y, dtype=float)
    x = y + alpha - 1.0
    brk = (1.0 - alpha * alpha) / alpha
    return np.where(y <= brk, 1.0 / (x + 2.0), 1.0 / (x + 1.0)) / math.log1p(alpha)


def closed_form_cell_averages(alpha: float, n_cells: int) -> np.ndarray:
    """Exact cell averages of the closed-form density on the uniform grid."""
    e = np.linspace(0.0, 1.0, n_cells + 1)
    brk = (1.0 - alpha * alpha) / alpha

    def prim(y):
        # antiderivative, continuous in y
        x = y + alpha - 1.0
        xb = brk + alpha - 1.0
        left = np.log(np.minimum(x, xb) + 2.0)
        right = np.where(x > xb, np.log(x + 1.0) - np.log(xb + 1.0), 0.0)
        return (left + right) / math.log1p(alpha)

    return np.diff(prim(e)) * n_cells


def l1_distance(a: GridFunction, b: GridFunction) -> float:
    if a.n_cells != b.n_cells:
        raise ValueError("grids differ")
    return float(np.abs(a.values - b.values).sum() * a.h)


# ----------------------------------------------------------------------------
# variation


def _cells_meeting(f: GridFunction, sub_interval):
    if sub_interval is None:
        return 0, f.n_cells
    lo, hi = sub_interval
    e = f.edges
    i0 = int(np.searchsorted(e, lo, side="right")) - 1
    i1 = int(np.searchsorted(e, hi, side="left"))
    return max(i0, 0), min(i1, f.n_cells)


def total_variation(f: GridFunction, sub_interval=None) -> float:
    """Sum of absolute jumps between consecutive cells meeting ``sub_interval``."""
    i0, i1 = _cells_meeting(f, sub_interval)
    if i1 - i0 < 2:
        return 0.0
    return float(np.abs(np.diff(f.values[i0:i1])).sum())


def _overlap_lengths(f: GridFunction, lo, hi):
    e = f.edges
    return np.clip(np.minimum(e[1:], hi) - np.maximum(e[:-1], lo), 0.0, None)


def integral_abs(f: GridFunction, sub_interval=None) -> float:
    if sub_interval is None:
        return f.l1_norm()
    w = _overlap_lengths(f, *sub_interval)
    return float(np.abs(f.values) @ w)


@dataclass
class InequalityCheck:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12) + 1e-12


@dataclass
class BVReport:
    """The four elementary variation inequalities evaluated on the grid."""

    sup_bound: InequalityCheck
    product_rule: InequalityCheck
    smooth_product_rule: InequalityCheck
    restriction: InequalityCheck

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in (self.sup_bound, self.product_rule, self.smooth_product_rule, self.restriction))

    def as_dict(self) -> dict:
        return {
            name: {"lhs": c.lhs, "rhs": c.rhs, "holds": c.holds}
            for name, c in vars(self).items()
        }


def bv_inequalities_check(f: GridFunction, g: GridFunction, J) -> BVReport:
    """Check the sup bound, product rules and restriction bound on ``J``."""
    i0, i1 = _cells_meeting(f, J)
    fj, gj = f.values[i0:i1], g.values[i0:i1]
    mj = f.h * (i1 - i0)
    var_f = total_variation(f, J)
    var_g = total_variation(g, J)
    sup_f = float(np.abs(fj).max())
    sup_g = float(np.abs(gj).max())
    int_f = float(np.abs(fj).sum() * f.h)
    var_fg = float(np.abs(np.diff(fj * gj)).sum())
    dg = float(np.abs(np.diff(gj)).max() / f.h) if gj.size > 1 else 0.0
    chi = np.zeros(f.n_cells)
    chi[i0:i1] = 1.0
    var_restricted = float(np.abs(np.diff(f.values * chi)).sum())
    return BVReport(
        sup_bound=InequalityCheck(sup_f, var_f + int_f / mj),
        product_rule=InequalityCheck(var_fg, sup_f * var_g + sup_g * var_f),
        smooth_product_rule=InequalityCheck(var_fg, var_f * sup_g + dg * int_f),
        restriction=InequalityCheck(var_restricted, var_f + 2.0 * sup_f),
    )


# ----------------------------------------------------------------------------
# mild-growth norm


@dataclass(frozen=True)
class BKDeltaParams:
    K: int
    delta: float
    k_max: int

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.K > self.k_max:
            raise ValueError("K must not exceed k_max")

    def satisfies_growth_hypothesis(self, amap: AlphaMap) -> bool:
        if amap.alpha >= 1.0:
            return self.K >= 1
        return self.K > max(1.0 / amap.alpha, 1.0 / (1.0 - amap.alpha))


@dataclass
class BKDeltaNorm:
    value: float
    argmax_k: int
    stabilized: bool
    terms: np.ndarray


def nested_intervals(amap: AlphaMap, k: int):
    """``L_k^+`` and ``L_k^-`` (the latter None at alpha = 1)."""
    c = 1.0 / (k + amap.alpha)
    plus = (c, amap.right)
    minus = (amap.left, -c) if amap.alpha < 1.0 else None
    return plus, minus


def bkdelta_norm(f: GridFunction, params: BKDeltaParams) -> BKDeltaNorm:
    """``max_k k^-delta var_{L_k} f + int_{L_k} |f|`` over ``K <= k <= k_max``."""
    amap = f.amap
    ks = np.arange(params.K, params.k_max + 1)
    jumps = np.abs(np.diff(f.values))
    absf = np.abs(f.values)
    e = f.edges
    # suffix sums: variation over cells i0..end, and |f| integrals
    suffix_var = np.concatenate([np.cumsum(jumps[::-1])[::-1], [0.0, 0.0]])
    prefix_var = np.concatenate([[0.0], np.cumsum(jumps)])
    terms = np.empty(ks.size)
    for idx, k in enumerate(ks):
        plus, minus = nested_intervals(amap, int(k))
        i0 = max(int(np.searchsorted(e, plus[0], side="right")) - 1, 0)
        var = suffix_var[i0]
        integ = absf @ _overlap_lengths(f, *plus)
        if minus is not None:
            i1 = min(int(np.searchsorted(e, minus[1], side="left")), f.n_cells)
            var += prefix_var[max(i1 - 1, 0)]
            integ += absf @ _overlap_lengths(f, *minus)
        terms[idx] = k ** (-params.delta) * var + integ
    arg = int(np.argmax(terms))
    stabilized = arg < ks.size - 1
    if not stabilized:
        warnings.warn("mild-growth norm attained at k_max; truncation suspect", RuntimeWarning, stacklevel=2)
    return BKDeltaNorm(float(terms[arg]), int(ks[arg]), stabilized, terms)


def growth_constant(amap: AlphaMap, params: BKDeltaParams) -> float:
    """Constant A in ``|f(x)| <= A |x|^-delta ||f||``, as produced by the proof."""
    plus, minus = nested_intervals(amap, params.K)
    m = plus[1] - plus[0]
    if minus is not None:
        m = min(m, minus[1] - minus[0])
    return 2.0**params.delta + params.K**params.delta + 1.0 / m
