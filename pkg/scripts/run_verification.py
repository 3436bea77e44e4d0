"""Closed forms against the moment-equation oracle on the full acceptance grid.

6 times over three slow periods x s in {0, 1, 2} x T in {0, 3 K} x gamma in {0, 1 Hz}.
"""

import argparse
import json
import math

import numpy as np

from optoforce.moment_oracle import verify_against_closed_form
from optoforce.params import PhysicalParams, derive_couplings, thermal_occupation


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="verification_report.json")
    ap.add_argument("--t-points", type=int, default=6)
    ap.add_argument("--tolerance", type=float, default=1e-6)
    args = ap.parse_args()

    p = PhysicalParams()
    d = derive_couplings(p)
    t_grid = np.linspace(0, 3 * 2 * math.pi / d.omega, args.t_points)
    nbars = [thermal_occupation(T, p.mech_freq_rad_s) for T in (0.0, 3.0)]
    report = verify_against_closed_form(p, t_grid, [0.0, 1.0, 2.0], nbars, gamma_list=[0.0, 1.0],
                                        tolerance=args.tolerance)
    with open(args.out, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2)
    print(f"{'PASS' if report.passed else 'FAIL'}: {len(report.points)} points, "
          f"max signal err {report.max_signal_error:.3e}, max noise err {report.max_noise_error:.3e}")
    for pt in report.worst_points(3):
        print(f"  gamma={pt.gamma} s={pt.s} nbar={pt.nbar:.4g} t={pt.t:.6f}: "
              f"signal {pt.signal_rel_err:.2e}, noise {pt.noise_rel_err:.2e}")


if __name__ == "__main__":
    main()
