"""Lower-envelope F/F_SQL versus squeezing at several temperatures (gamma = 1 Hz, t = t1)."""

import argparse

from optoforce.analysis import Axis, SweepSpec, find_first_minimum, sweep
from optoforce.cli import to_csv
from optoforce.params import PhysicalParams

TEMPERATURES = (0.0, 0.03, 3.0, 300.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="temperature_sweep.csv")
    ap.add_argument("--s-max", type=float, default=10.0)
    ap.add_argument("--points", type=int, default=1001)
    args = ap.parse_args()

    base = PhysicalParams(damping_hz=1.0)
    t1, _ = find_first_minimum(base)
    rows, columns = [], None
    for T in TEMPERATURES:
        spec = SweepSpec(axis1=Axis("squeezing", 0.0, args.s_max, args.points), output="sql_ratio",
                         time=t1, fixed={"temperature_k": T})
        res = sweep(spec, base)
        columns = ["temperature"] + res.columns
        rows += [{"temperature": T, **r} for r in res.rows]
        ratio = res.column("sql_ratio")
        print(f"T={T:g} K: min sql_ratio {ratio.min():.4e}, any below 1: {bool((ratio < 1).any())}")
    with open(args.out, "w", newline="") as fh:
        fh.write(to_csv(columns, rows))
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
