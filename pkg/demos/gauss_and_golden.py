"""Invariant densities and entropy at a few parameters.

Above the golden mean the computed density is compared with its closed
form; the entropy is computed both by the Rohlin integral and by Birkhoff
averages along sampled orbits.

Run: python3 demos/gauss_and_golden.py
"""
import math

import numpy as np

from alphacf import AlphaMap
from alphacf.entropy import birkhoff_entropy, rohlin_entropy
from alphacf.transfer import closed_form_cell_averages, invariant_density


def main():
    print(f"{'alpha':>6} {'L1 to closed form':>18} {'rohlin':>10} {'birkhoff':>10} {'stderr':>8}")
    for alpha in (0.4, 0.5, (math.sqrt(5) - 1) / 2, 0.7, 0.85, 1.0):
        amap = AlphaMap(alpha)
        rho = invariant_density(amap, 4096)
        if alpha >= (math.sqrt(5) - 1) / 2:
            l1 = np.abs(rho.values - closed_form_cell_averages(alpha, 4096)).sum() * rho.h
            l1_text = f"{l1:18.2e}"
        else:
            l1_text = f"{'n/a':>18}"
        r = rohlin_entropy(amap, rho)
        b = birkhoff_entropy(amap, 10_000, 1000, seed=1, density=rho)
        print(f"{alpha:6.4f} {l1_text} {r.value:10.5f} {b.value:10.5f} {b.error_proxy:8.1e}")
    print(f"Gauss map reference pi^2/(6 log 2) = {math.pi**2 / (6 * math.log(2)):.5f}")


if __name__ == "__main__":
    main()
