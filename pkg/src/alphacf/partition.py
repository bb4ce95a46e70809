"""Branches, cylinders and the weight functions g_n.

A branch ``(j, eps)`` is the maximal interval on which the digit equals
``(j, eps)``.  Cylinders of depth ``n`` are enumerated word by word: every
inverse branch ``y -> eps/(y + j)`` is a Moebius map, so a word is carried
around as the product of its 2x2 matrices and interval endpoints are pushed
through it directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mapcore import AlphaMap, DomainError, step

IMAGE_TOL = 1e-10


class BranchId(NamedTuple):
    j: int
    eps: int


def _bound(amap: AlphaMap, eps: int) -> float:
    """Largest |x| on the side of the given sign."""
    return amap.alpha if eps > 0 else 1.0 - amap.alpha


def first_branch(amap: AlphaMap, eps: int) -> int | None:
    return amap.j_min if eps > 0 else amap.j_min_neg


def is_admissible(amap: AlphaMap, bid: BranchId) -> bool:
    j0 = first_branch(amap, bid.eps)
    return bid.eps in (1, -1) and j0 is not None and bid.j >= j0


def branch_interval(amap: AlphaMap, bid: BranchId) -> tuple[float, float]:
    """Open interval ``(lo, hi)`` of points with digit ``bid``."""
    if not is_admissible(amap, bid):
        raise DomainError(f"branch {bid} is not admissible for alpha={amap.alpha}")
    j, eps = bid
    a = amap.alpha
    inner = 1.0 / (j + a)
    outer = min(1.0 / (j - 1 + a), _bound(amap, eps))
    if eps > 0:
        return inner, outer
    return -outer, -inner


def branch_image(amap: AlphaMap, bid: BranchId) -> tuple[float, float]:
    """Image of a branch under T; the whole interval unless the branch is truncated."""
    lo, hi = branch_interval(amap, bid)
    far = hi if bid.eps > 0 else -lo
    left = max(1.0 / far - bid.j, amap.left)
    return left, amap.right


def is_full(amap: AlphaMap, bid: BranchId) -> bool:
    return branch_image(amap, bid)[0] <= amap.left + IMAGE_TOL


def branches(amap: AlphaMap, j_max: int) -> list[BranchId]:
    """All admissible branches with digit at most ``j_max``, ordered left to right."""
    neg = []
    if amap.j_min_neg is not None:
        neg = [BranchId(j, -1) for j in range(amap.j_min_neg, j_max + 1)]
    pos = [BranchId(j, 1) for j in range(j_max, amap.j_min - 1, -1)]
    return neg + pos


def inverse_branch(amap: AlphaMap, bid: BranchId, y: float) -> float:
    """The point of branch ``bid`` mapped to ``y``."""
    if not (amap.left - 1e-14 <= y <= amap.right + 1e-14):
        raise DomainError(f"y={y!r} outside the interval")
    lo, hi = branch_interval(amap, bid)
    x = bid.eps / (y + bid.j)
    if not (lo - 1e-14 <= x <= hi + 1e-14):
        raise DomainError(f"y={y!r} is not in the image of branch {bid}")
    return x


def moebius(bid: BranchId) -> np.ndarray:
    """Matrix of ``y -> eps/(y + j)``."""
    return np.array([[0.0, float(bid.eps)], [1.0, float(bid.j)]])


def apply_moebius(m: np.ndarray, y):
    return (m[0, 0] * y + m[0, 1]) / (m[1, 0] * y + m[1, 1])


def _sorted(a: float, b: float) -> tuple[float, float]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Cylinder:
    word: tuple[BranchId, ...]
    interval: tuple[float, float]
    image: tuple[float, float]
    full: bool

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]


def _branch_map(bid: BranchId, z: tuple[float, float]) -> tuple[float, float]:
    # T restricted to the branch, applied to an interval inside it
    return _sorted(1.0 / abs(z[0]) - bid.j, 1.0 / abs(z[1]) - bid.j)


def _refine(amap, cyl_state, brs):
    word, mat, image = cyl_state
    for b in brs:
        lo, hi = branch_interval(amap, b)
        z = (max(lo, image[0]), min(hi, image[1]))
        if z[1] - z[0] <= 0.0:
            continue
        new_image = _branch_map(b, z)
        new_image = (max(new_image[0], amap.left), min(new_image[1], amap.right))
        new_mat = mat @ moebius(b)
        yield word + (b,), new_mat, new_image


def cylinders(amap: AlphaMap, n: int, j_max: int) -> list[Cylinder]:
    """Cylinders of depth ``n`` built from branches with digits up to ``j_max``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if j_max < amap.j_min + 1:
        raise ValueError("j_max must exceed j_min")
    brs = branches(amap, j_max)
    states = [((), np.eye(2), (amap.left, amap.right))]
    for _ in range(n):
        states = [s for st in states for s in _refine(amap, st, brs)]
    out = []
    for word, mat, image in states:
        interval = _sorted(apply_moebius(mat, image[0]), apply_moebius(mat, image[1]))
        full = image[0] <= amap.left + IMAGE_TOL and image[1] >= amap.right - IMAGE_TOL
        out.append(Cylinder(word, interval, image, full))
    out.sort(key=lambda c: c.interval[0])
    return out


def _dedupe(intervals, tol):
    out = []
    for iv in sorted(intervals):
        if not any(abs(iv[0] - o[0]) <= tol and abs(iv[1] - o[1]) <= tol for o in out):
            out.append(iv)
    return out


def images(amap: AlphaMap, n: int, j_max: int = 200) -> list[tuple[float, float]]:
    """Distinct images ``T^n(C)`` over the cylinders ``C`` of depth ``n``.

    Only the set of images is propagated, so the cost does not grow with the
    number of cylinders.
    """
    brs = branches(amap, j_max)
    current = [(amap.left, amap.right)]
    for _ in range(n):
        nxt = []
        for image in current:
            for b in brs:
                lo, hi = branch_interval(amap, b)
                z = (max(lo, image[0]), min(hi, image[1]))
                if z[1] - z[0] <= 0.0:
                    continue
                new = _branch_map(b, z)
                nxt.append((max(new[0], amap.left), min(new[1], amap.right)))
        current = _dedupe(nxt, IMAGE_TOL)
    return current


def image_count(amap: AlphaMap, n: int, j_max: int = 200) -> int:
    return len(images(amap, n, j_max))


def _on_boundary(alpha: float, x: float) -> bool:
    if x == 0.0 or x == alpha or x == alpha - 1.0:
        return True
    v = 1.0 / abs(x) + 1.0 - alpha
    return v == math.floor(v)


def weight(amap: AlphaMap, n: int, x: float, minimal_variation: bool = False) -> float:
    """g_n(x) = 1/|(T^n)'(x)|, the product of the squared orbit points.

    With ``minimal_variation=True`` the value is 0 on the boundaries of the
    depth-``n`` cylinders (the representative of least variation); otherwise
    the chain-rule product is returned everywhere.
    """
    g = 1.0
    for _ in range(n):
        if minimal_variation and _on_boundary(amap.alpha, x):
            return 0.0
        g *= x * x
        x = step(amap, x)
    return g


def weight_array(amap: AlphaMap, n: int, x) -> np.ndarray:
    """Vectorised ``weight`` (boundary points are not detected)."""
    x = np.array(x, dtype=float)
    g = np.ones_like(x)
    for _ in range(n):
        g *= x * x
        x = step(amap, x)
    return g


def weight_sup_bound(amap: AlphaMap, n: int) -> float:
    """Upper bound for sup g_n: gamma^n, or 4 g^(2n-4) at alpha = 1."""
    if amap.alpha >= 1.0:
        return 4.0 * ((math.sqrt(5.0) - 1.0) / 2.0) ** (2 * n - 4)
    return amap.gamma**n


def same_cylinder(amap: AlphaMap, n: int, x1: float, x2: float) -> bool:
    """Whether two points share their first ``n`` digits."""
    from .mapcore import digit

    for _ in range(n):
        if x1 == 0.0 or x2 == 0.0:
            return False
        if digit(amap, x1) != digit(amap, x2):
            return False
        x1, x2 = step(amap, x1), step(amap, x2)
    return True


def weight_derivative_fd(amap: AlphaMap, n: int, x: float, h: float = 1e-6) -> float | None:
    """Central difference of g_n at ``x``; None if the stencil leaves the cylinder."""
    lo, hi = x - h, x + h
    if not (amap.left <= lo and hi <= amap.right):
        return None
    if not (same_cylinder(amap, n, lo, x) and same_cylinder(amap, n, x, hi)):
        return None
    return (weight(amap, n, hi) - weight(amap, n, lo)) / (2.0 * h)


def weight_one_variation(amap: AlphaMap, j_max: int = 100000) -> float:
    """Total variation of g_1 over the interval, counted branch by branch.

    On each branch g_1 = x^2 is monotone and vanishes at both ends, so the
    branch contributes twice its largest value.  Branches beyond ``j_max``
    are added through their closed-form sum.
    """
    from scipy.special import polygamma

    total = 0.0
    for b in branches(amap, j_max):
        lo, hi = branch_interval(amap, b)
        total += 2.0 * max(lo * lo, hi * hi)
    # sum_{j > j_max} 2/(j - 1 + alpha)^2 on each side
    sides = 1 if amap.j_min_neg is None else 2
    total += sides * 2.0 * float(polygamma(1, j_max + amap.alpha))
    return total


def truncation_tail(amap: AlphaMap, j_max: int) -> float:
    """Lebesgue measure of the branches with digit above ``j_max``."""
    sides = 1 if amap.j_min_neg is None else 2
    return sides / (j_max + amap.alpha)
