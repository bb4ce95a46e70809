"""Keyed random seeds and vectorised Birkhoff sums."""
from __future__ import annotations

import numpy as np

from .mapcore import AlphaMap, _step_array
from .transfer import GridFunction

MAX_RESAMPLE = 20


def keyed_uniforms(seed: int, start: int, count: int, stream: int = 0) -> np.ndarray:
    """Uniforms number ``start .. start + count - 1`` of the stream keyed by ``(seed, stream)``.

    Philox is counter based, so value ``i`` depends only on the key and
    ``i``; any slice of a run can be regenerated independently.
    """
    key = (int(seed) & (2**64 - 1)) | (int(stream) << 64)
    bg = np.random.Philox(key=key)
    # Philox4x64 yields four 64-bit words per counter step; one double per word
    bg.advance(start // 4)
    gen = np.random.Generator(bg)
    skip = start % 4
    return gen.random(count + skip)[skip:]


def sample_from_density(density: GridFunction, u) -> np.ndarray:
    """Inverse-CDF transform of uniforms ``u`` through a piecewise-constant density."""
    masses = np.clip(density.values, 0.0, None) * density.h
    cdf = np.cumsum(masses)
    cdf /= cdf[-1]
    u = np.asarray(u, dtype=float)
    i = np.minimum(np.searchsorted(cdf, u, side="right"), density.n_cells - 1)
    lower = np.where(i > 0, cdf[np.maximum(i - 1, 0)], 0.0)
    frac = (u - lower) / np.where(masses[i] > 0, masses[i] / cdf[-1] * 1.0, 1.0)
    e = density.edges
    x = e[i] + np.clip(frac, 0.0, 1.0) * density.h
    return np.clip(x, density.amap.left, density.amap.right)


def draw_seeds(amap: AlphaMap, m: int, seed: int, density: GridFunction | None = None,
               stream: int = 0, start: int = 0) -> np.ndarray:
    """``m`` initial points: from ``density`` if given, else uniform on the interval."""
    u = keyed_uniforms(seed, start, m, stream)
    if density is None:
        return amap.left + amap.length * u
    return sample_from_density(density, u)


def birkhoff_sums(amap: AlphaMap, x0, n: int, func, checkpoints=None, burn_in: int = 0):
    """Birkhoff sums of ``func`` along the orbits of the points ``x0``.

    Returns ``(sums, hit_zero)`` where ``sums`` has one row per checkpoint
    (default: only ``n``) and ``hit_zero`` flags orbits that landed on 0.
    """
    x = np.array(x0, dtype=float)
    alpha = amap.alpha
    hit = np.zeros(x.shape, dtype=bool)
    for _ in range(burn_in):
        x = _step_array(alpha, x)
        hit |= x == 0.0
    checkpoints = sorted(set([n] if checkpoints is None else checkpoints))
    out = np.empty((len(checkpoints), x.size))
    s = np.zeros_like(x)
    row = 0
    with np.errstate(divide="ignore"):
        for k in range(1, n + 1):
            hit |= x == 0.0
            s += func(x)
            x = _step_array(alpha, x)
            if k == checkpoints[row]:
                out[row] = s
                row += 1
                if row == len(checkpoints):
                    break
    return out, hit


def sampled_birkhoff_sums(amap: AlphaMap, n: int, m: int, seed: int, func,
                          density: GridFunction | None = None, checkpoints=None,
                          burn_in: int = 0) -> np.ndarray:
    """Birkhoff sums for ``m`` keyed seeds; orbits that hit 0 are redrawn."""
    x0 = draw_seeds(amap, m, seed, density)
    sums, hit = birkhoff_sums(amap, x0, n, func, checkpoints, burn_in)
    for attempt in range(1, MAX_RESAMPLE + 1):
        bad = np.flatnonzero(hit)
        if bad.size == 0:
            return sums
        redo = np.array([draw_seeds(amap, 1, seed, density, stream=attempt, start=int(i))[0] for i in bad])
        s2, h2 = birkhoff_sums(amap, redo, n, func, checkpoints, burn_in)
        sums[:, bad] = s2
        hit[:] = False
        hit[bad] = h2
    raise RuntimeError("orbits keep hitting 0; the observable or seed set is degenerate")
