"""Entropy near the golden mean: the kink and the Hölder constants.

Run: python3 demos/entropy_kink.py  (about 10 s on one core)
Set ACF_THREADS to cap the number of worker processes.
"""
import math

from alphacf.entropy import SweepConfig, alpha_grid, detect_kink, holder_fit, sweep_entropy


def main():
    sweep = sweep_entropy(alpha_grid(0.57, 0.67, 0.002), SweepConfig(n_cells=1024))
    for a, h in zip(sweep.alphas, sweep.values):
        print(f"{a:.3f}  {h:.6f}")
    loc, jump = detect_kink(sweep.alphas, sweep.values)
    print(f"largest slope change {jump:.2f} at alpha = {loc:.3f} (golden mean {(math.sqrt(5) - 1) / 2:.4f})")
    for s in (0.3, 0.49, 1.0):
        print(f"C(s={s}) = {holder_fit(sweep, s).C:.4f}")


if __name__ == "__main__":
    main()
