"""Lower-envelope F/F_SQL versus two-mode squeezing at the first minimum (gamma = 1 Hz, T = 0)."""

import argparse

import numpy as np

from optoforce.analysis import Axis, SweepSpec, find_first_minimum, optimal_squeezing, sweep
from optoforce.cli import to_csv
from optoforce.params import PhysicalParams, derive_couplings


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="squeezing_sweep.csv")
    ap.add_argument("--s-max", type=float, default=10.0)
    ap.add_argument("--points", type=int, default=1001)
    args = ap.parse_args()

    base = PhysicalParams(damping_hz=1.0, temperature_k=0.0)
    t1, _ = find_first_minimum(base)
    spec = SweepSpec(axis1=Axis("squeezing", 0.0, args.s_max, args.points), output="sql_ratio", time=t1)
    res = sweep(spec, base)
    with open(args.out, "w", newline="") as fh:
        fh.write(to_csv(res.columns, res.rows))

    ratio = res.column("sql_ratio")
    s = res.column("squeezing")
    s_star, f_star = optimal_squeezing(derive_couplings(base), t1, 0.0)
    below = s[ratio < 1]
    print(f"t1 = {t1 * 1e3:.4f} ms")
    print(f"sql_ratio: s=0 -> {ratio[0]:.4e}, min {ratio.min():.4e} at s={s[int(np.argmin(ratio))]:.3f}")
    print(f"closed-form optimum s* = {s_star:.4f} ({20 * s_star / np.log(10):.1f} dB)")
    print("first s with sql_ratio < 1:", f"{below[0]:.3f}" if below.size else "none")


if __name__ == "__main__":
    main()
