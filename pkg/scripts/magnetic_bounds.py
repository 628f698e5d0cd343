"""Magnetic upper bound against its envelope, and the I_+ + I_- + I_0 majorant.

Writes one CSV row per grid point and axis.  Columns: b, t = beta hbar <b>,
p, mu / Lambda_0, regime, upper/envelope, j, method for S^p, S^p / total.
Methods other than "exact" are rigorous upper bounds on S^p.
Takes several minutes with the default grid.

    python scripts/magnetic_bounds.py [--hbar 0.05] > magnetic_bounds.csv
"""
import argparse
import csv
import itertools
import math
import sys

from fermicomm.magnetic_spectral import (
    LatticeBudgetError,
    MagneticSpectrum,
    combined_gradient_upper_bound,
    decomposition_bounds,
    line_sum_upper_bound,
    magnetic_commutator_sum,
    magnetic_envelope,
    plane_sum_upper_bound,
)
from fermicomm.model_params import PhysicalParams, classify_regime


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hbar", type=float, default=0.05)
    ap.add_argument("--b", type=float, nargs="+", default=[0.0, 1.0, math.sqrt(2.0), 10.0, 100.0])
    ap.add_argument("--t", type=float, nargs="+", default=[0.01, 0.1, 1.0, 10.0, 100.0])
    ap.add_argument("--p", type=float, nargs="+", default=[1.0, 2.0])
    ap.add_argument("--mu-factor", type=float, nargs="+", default=[1.0, 2.0, 4.0])
    ap.add_argument("--plus-form", choices=["displayed", "exact"], default="displayed")
    args = ap.parse_args()

    out = csv.writer(sys.stdout)
    out.writerow(["b", "t", "p", "mu_factor", "regime", "upper_over_envelope", "j", "method", "Sp_over_total"])
    for b, t, p, m in itertools.product(args.b, args.t, args.p, args.mu_factor):
        bb = math.sqrt(1.0 + b * b)
        prm = PhysicalParams(args.hbar, t / (args.hbar * bb), m * (2 * bb + 1) * args.hbar, 3, b)
        spec = MagneticSpectrum(prm)
        ratio = combined_gradient_upper_bound(spec, p).value / magnetic_envelope(prm, p).value
        for j in (1, 2, 3):
            try:
                total = decomposition_bounds(spec, j, p, plus_form=args.plus_form).total
            except LatticeBudgetError:
                out.writerow([b, t, p, m, classify_regime(prm).value, f"{ratio:.6g}", j, "budget", ""])
                continue
            try:
                lhs, how = math.exp(p * magnetic_commutator_sum(spec, j, p).log_value), "exact"
            except LatticeBudgetError:
                try:
                    lhs, how = line_sum_upper_bound(spec, j, p), "line"
                except LatticeBudgetError:
                    lhs, how = plane_sum_upper_bound(spec, j, p), "plane"
            out.writerow([b, t, p, m, classify_regime(prm).value, f"{ratio:.6g}", j, how,
                          f"{lhs / total:.6g}"])
            sys.stdout.flush()


if __name__ == "__main__":
    main()
