"""How the map and its density move with the parameter.

Prints near-conjugacy certificates around 0.7 and the distance between
translated densities around 0.8, where the L1 distance shrinks with the
parameter gap but the variation distance does not.

Run: python3 demos/parameter_continuity.py
"""
from alphacf.continuity import density_l1_modulus, keller_bound_curve, keller_construct


def main():
    c = keller_construct(0.70, 0.71)
    print(c.to_json())
    rows, slope = keller_bound_curve(0.7, [0.0005, 0.001, 0.002, 0.005, 0.01, 0.02])
    print("kappa(r):", ", ".join(f"{r:g}: {k:.4f}" for r, k in rows), f"(log-log slope {slope:.2f})")
    rows, slope = density_l1_modulus(0.8, [0.002, 0.005, 0.01, 0.02])
    for row in rows:
        print(f"r={row.r:<6g} L1={row.l1:.4f} var={row.bv:.3f}")
    print(f"L1 log-log slope {slope:.2f}")


if __name__ == "__main__":
    main()
