"""Limit variance of the entropy observable by three estimators, then a KS test.

Run: python3 demos/variance_and_clt.py
"""
import math

from alphacf import AlphaMap
from alphacf.observables import LogDerivative
from alphacf.stochastics import birkhoff_samples, normality_test, variance_eigen, variance_green_kubo, variance_mn
from alphacf.transfer import invariant_density


def main():
    f = LogDerivative()
    for alpha in (0.7, 1.0):
        amap = AlphaMap(alpha)
        rho = invariant_density(amap, 4096)
        mn = variance_mn(amap, f, m=20_000, density=rho)
        gk = variance_green_kubo(amap, f, density=rho)
        ev = variance_eigen(amap, f, density=rho)
        ladder = ", ".join(f"M_{n}={v:.3f}" for n, v in mn.params["ladder"].items())
        print(f"alpha={alpha}: {ladder}")
        print(f"  Green-Kubo {gk.value:.4f} (lag decay {gk.params['lambda']:.3f}), lambda''(0) {ev.value:.4f}")
        sample = birkhoff_samples(amap, f, 5000, 5000, seed=3, density=rho)
        ks = normality_test(sample, math.sqrt(gk.value))
        print(f"  KS distance {ks.statistic:.4f}, 1% critical value {ks.critical:.4f}, pass {ks.passed}")


if __name__ == "__main__":
    main()
