"""Lower-envelope log10(F/F_SQL) versus interaction time for three damping rates (s = 0, T = 0).

Writes one CSV with a row per (damping, time) and prints the first three minima per damping.
"""

import argparse
import math

from optoforce.analysis import Axis, SweepSpec, find_envelope_minimum, sweep
from optoforce.cli import to_csv
from optoforce.params import PhysicalParams, default_tau, derive_couplings, sql_force

DAMPINGS = (0.01, 0.1, 1.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="time_sweep.csv")
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--periods", type=float, default=3.0, help="time span in slow periods 2 pi / omega")
    args = ap.parse_args()

    base = PhysicalParams(squeezing=0.0, temperature_k=0.0)
    d = derive_couplings(base)
    t_max = args.periods * 2 * math.pi / d.omega
    rows, columns = [], None
    for g in DAMPINGS:
        spec = SweepSpec(axis1=Axis("time", t_max / args.points, t_max, args.points),
                         fixed={"damping_hz": g}, output="log10_sql_ratio")
        res = sweep(spec, base)
        columns = ["damping"] + res.columns
        rows += [{"damping": g, **r} for r in res.rows]
    with open(args.out, "w", newline="") as fh:
        fh.write(to_csv(columns, rows))
    print(f"wrote {len(rows)} rows to {args.out}")

    for g in DAMPINGS:
        dg = derive_couplings(base.replace(damping_hz=g))
        F_sql = sql_force(dg.mass, dg.Omega, default_tau(dg.Theta))
        mins = [find_envelope_minimum(dg, k, 0.0, 0.0) for k in range(3)]
        text = ", ".join(f"t={t * 1e3:.3f} ms log10={math.log10(f * dg.force_scale / F_sql):.4f}" for t, f in mins)
        print(f"gamma={g:g} Hz: {text}")


if __name__ == "__main__":
    main()
