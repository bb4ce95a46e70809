"""Observables evaluated along orbits and averaged over grid cells.

Grid computations need cell averages of ``f``, of ``(f - c)^2`` and of
``exp(theta (f - c))``.  The entropy observable ``-2 log|x|`` has closed
forms for all three (so the cell containing 0 needs no special care);
everything else falls back to 8-point Gauss-Legendre quadrature per cell,
whose nodes never sit on a cell edge.
"""
from __future__ import annotations

import numpy as np

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _quad_cells(func, edges):
    a, b = edges[:-1, None], edges[1:, None]
    x = 0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES[None, :]
    return 0.5 * (func(x) * _GL_WEIGHTS[None, :]).sum(axis=1)


class Observable:
    """A real function on the interval, vectorised over numpy arrays."""

    name = "observable"

    def __init__(self, func=None, name: str | None = None):
        self._func = func
        if name is not None:
            self.name = name

    def __call__(self, x):
        return self._func(x)

    def cell_averages(self, edges) -> np.ndarray:
        return _quad_cells(self, edges)

    def cell_square_averages(self, edges, shift: float = 0.0) -> np.ndarray:
        return _quad_cells(lambda x: (self(x) - shift) ** 2, edges)

    def cell_exp_averages(self, edges, theta: float, shift: float = 0.0) -> np.ndarray:
        return _quad_cells(lambda x: np.exp(theta * (self(x) - shift)), edges)

    @property
    def is_constant(self) -> bool:
        return False

    def __repr__(self):
        return f"<Observable {self.name}>"


class Constant(Observable):
    def __init__(self, value: float = 1.0):
        self.value = float(value)
        self.name = f"const({value:g})"

    def __call__(self, x):
        return np.full(np.shape(x), self.value)

    @property
    def is_constant(self) -> bool:
        return True


class Identity(Observable):
    name = "x"

    def __call__(self, x):
        return np.asarray(x, dtype=float)


def _log_abs(x):
    ax = np.abs(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(ax > 0, np.log(np.where(ax > 0, ax, 1.0)), 0.0)
    return lg


class LogDerivative(Observable):
    """``log|T'(x)| = -2 log|x|``; its mean under the invariant measure is the entropy."""

    name = "logderiv"

    def __call__(self, x):
        return -2.0 * np.log(np.abs(x))

    @staticmethod
    def _int_log(edges):
        # antiderivative of log|x|: x log|x| - x (continuous through 0)
        x = np.asarray(edges, dtype=float)
        return x * _log_abs(x) - x

    @staticmethod
    def _int_log2(edges):
        x = np.asarray(edges, dtype=float)
        lg = _log_abs(x)
        return x * lg * lg - 2.0 * x * lg + 2.0 * x

    def cell_averages(self, edges):
        edges = np.asarray(edges, dtype=float)
        return -2.0 * np.diff(self._int_log(edges)) / np.diff(edges)

    def cell_square_averages(self, edges, shift=0.0):
        # (-2L - c)^2 = 4 L^2 + 4 c L + c^2
        edges = np.asarray(edges, dtype=float)
        w = np.diff(edges)
        il = np.diff(self._int_log(edges)) / w
        il2 = np.diff(self._int_log2(edges)) / w
        return 4.0 * il2 + 4.0 * shift * il + shift * shift

    def cell_exp_averages(self, edges, theta, shift=0.0):
        # exp(theta(-2 log|x| - c)) = e^{-theta c} |x|^{-2 theta}, integrable for theta < 1/2
        if theta >= 0.5:
            raise ValueError("exp(theta f) is not integrable near 0 for theta >= 1/2")
        edges = np.asarray(edges, dtype=float)
        p = 1.0 - 2.0 * theta
        prim = np.sign(edges) * np.abs(edges) ** p / p
        return np.exp(-theta * shift) * np.diff(prim) / np.diff(edges)


OBSERVABLES = {
    "logderiv": LogDerivative,
    "x": Identity,
    "const": Constant,
}


def get_observable(tag: str) -> Observable:
    try:
        return OBSERVABLES[tag]()
    except KeyError:
        raise ValueError(f"unknown observable {tag!r}; choose from {sorted(OBSERVABLES)}") from None
