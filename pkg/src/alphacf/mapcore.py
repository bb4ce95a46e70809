"""The alpha-continued fraction maps, digits, orbits and expansions.

For ``alpha`` in (0, 1] the map acts on ``[alpha - 1, alpha]`` by

    T(x) = 1/|x| - floor(1/|x| + 1 - alpha),    T(0) = 0,

and the orbit of a point produces signed continued-fraction digits
``(a_k, eps_k)`` with ``x = eps_1/(a_1 + eps_2/(a_2 + ...))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# orbit points within this distance outside the interval are pulled back in
CLAMP_TOL = 1e-14

# below this magnitude 1/|x| overflows a double
_TINY = 1.0 / np.finfo(float).max


class DomainError(ValueError):
    """Raised when a point lies outside the interval a map acts on."""


@dataclass(frozen=True)
class AlphaMap:
    """The map T_alpha together with its derived constants."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a <= 1.0) or math.isnan(a):
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def left(self) -> float:
        return self.alpha - 1.0

    @property
    def right(self) -> float:
        return self.alpha

    @property
    def length(self) -> float:
        return 1.0

    @property
    def j_min(self) -> int:
        """Smallest digit on the positive side.

        Equals ``ceil(1/alpha - alpha)`` except when that quantity is an
        integer, where the branch it names is empty and the next one is used
        (this also yields 1 at alpha = 1).
        """
        return int(math.floor(1.0 / self.alpha - self.alpha)) + 1

    @property
    def j_min_neg(self) -> int | None:
        """Smallest digit on the negative side; None when alpha = 1."""
        if self.alpha >= 1.0:
            return None
        return int(math.floor(1.0 / (1.0 - self.alpha) - self.alpha)) + 1

    @property
    def gamma(self) -> float:
        return max(self.alpha**2, (self.alpha - 1.0) ** 2)

    def contains(self, x) -> bool:
        return self.left - CLAMP_TOL <= x <= self.right + CLAMP_TOL

    def clamp(self, x):
        return np.clip(x, self.left, self.right)


class Digit(NamedTuple):
    a: int
    eps: int

    def __str__(self):
        return f"{self.a}{'+' if self.eps > 0 else '-'}"


def _check_point(amap: AlphaMap, x: float) -> float:
    x = float(x)
    if not amap.contains(x):
        raise DomainError(f"x={x!r} outside [{amap.left}, {amap.right}]")
    return min(max(x, amap.left), amap.right)


def digit(amap: AlphaMap, x: float) -> Digit:
    """Digit ``(floor(1/|x| + 1 - alpha), sign x)`` of a nonzero point."""
    x = _check_point(amap, x)
    if x == 0.0:
        raise DomainError("the digit of 0 is undefined")
    if abs(x) < _TINY:
        raise DomainError(f"x={x!r} is too close to 0 for its digit to be representable")
    a = math.floor(1.0 / abs(x) + 1.0 - amap.alpha)
    return Digit(int(a), 1 if x > 0 else -1)


def step(amap: AlphaMap, x):
    """One application of T_alpha; accepts scalars or arrays."""
    if np.ndim(x) == 0:
        x = _check_point(amap, x)
        if x == 0.0:
            return 0.0
        if abs(x) < _TINY:
            raise DomainError(f"x={x!r} is too close to 0 for double precision")
        inv = 1.0 / abs(x)
        y = inv - math.floor(inv + 1.0 - amap.alpha)
        return min(max(y, amap.left), amap.right)
    x = np.asarray(x, dtype=float)
    if np.any(x < amap.left - CLAMP_TOL) or np.any(x > amap.right + CLAMP_TOL):
        raise DomainError("array contains points outside the interval")
    return _step_array(amap.alpha, x)


def _step_array(alpha: float, x: np.ndarray) -> np.ndarray:
    # hot loop of every orbit simulation; no validation here
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / np.abs(x)
        y = inv - np.floor(inv + 1.0 - alpha)
    y = np.where(x == 0.0, 0.0, y)
    return np.clip(y, alpha - 1.0, alpha, out=y)


def orbit(amap: AlphaMap, x: float, n: int) -> np.ndarray:
    """Return ``[x, T x, ..., T^n x]``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    out = np.empty(n + 1)
    out[0] = _check_point(amap, x)
    for k in range(n):
        out[k + 1] = step(amap, out[k])
    return out


@dataclass(frozen=True)
class Expansion:
    """Signed continued-fraction digits of a seed plus the final orbit point."""

    a0: int
    digits: tuple[Digit, ...]
    residual: float

    def convergents(self) -> list[tuple[int, int]]:
        """All convergents ``(p_k, q_k)`` for k = 0..len(digits)."""
        p_prev, q_prev = 1, 0
        p, q = self.a0, 1
        out = [(p, q)]
        for d in self.digits:
            p, p_prev = d.a * p + d.eps * p_prev, p
            q, q_prev = d.a * q + d.eps * q_prev, q
            out.append((p, q))
        return out

    def value(self) -> float:
        """Reconstruct the seed from the digits and the residual."""
        cv = self.convergents()
        if not self.digits:
            return self.a0 + self.residual
        (p_prev, q_prev), (p, q) = cv[-2], cv[-1]
        r = self.residual
        return (p + r * p_prev) / (q + r * q_prev)

    def __str__(self):
        return ",".join(str(d) for d in self.digits)


def expand(amap: AlphaMap, x: float, n: int) -> Expansion:
    """Expand ``x`` to (at most) ``n`` digits; stops early when the orbit hits 0."""
    x = _check_point(amap, x)
    digits = []
    for _ in range(n):
        if x == 0.0:
            break
        digits.append(digit(amap, x))
        x = step(amap, x)
    return Expansion(0, tuple(digits), x)


def convergent(expansion: Expansion, k: int) -> tuple[int, int]:
    if not 0 <= k <= len(expansion.digits):
        raise ValueError(f"k must lie in [0, {len(expansion.digits)}]")
    return expansion.convergents()[k]


def convergent_fraction(expansion: Expansion, k: int) -> Fraction:
    p, q = convergent(expansion, k)
    return Fraction(p, q)


def log_derivative(x):
    """log|T'(x)| = -2 log|x|."""
    return -2.0 * np.log(np.abs(x))
