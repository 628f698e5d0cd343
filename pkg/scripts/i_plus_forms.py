"""The I_+ majorant with the factor (e^x - 1)/x and with the exact lattice sum.

Both are printed next to the zero-temperature shell value as beta grows;
the first form grows without bound while the second tends to zero.

    python scripts/i_plus_forms.py [--hbar 1] [--mu 7] [--b 1.414] [--p 2]
"""
import argparse
import math

from fermicomm.magnetic_spectral import MagneticSpectrum, decomposition_bounds, zero_temp_shell_sum
from fermicomm.model_params import PhysicalParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hbar", type=float, default=1.0)
    ap.add_argument("--mu", type=float, default=7.0)
    ap.add_argument("--b", type=float, default=math.sqrt(2.0))
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--j", type=int, default=1)
    ap.add_argument("--beta", type=float, nargs="+", default=[1, 3, 10, 30, 100, 300, 1000, 4000])
    args = ap.parse_args()

    zero = MagneticSpectrum(PhysicalParams(args.hbar, math.inf, args.mu, 3, args.b))
    shell = zero_temp_shell_sum(zero, args.j, args.p).value ** args.p
    print(f"zero-temperature S^p = {shell:.6g}")
    print(f"{'beta':>8s} {'I+ displayed':>14s} {'I+ exact':>14s} {'I-':>12s} {'I0':>12s}")
    for beta in args.beta:
        spec = MagneticSpectrum(PhysicalParams(args.hbar, beta, args.mu, 3, args.b))
        disp = decomposition_bounds(spec, args.j, args.p)
        ex = decomposition_bounds(spec, args.j, args.p, plus_form="exact")
        print(f"{beta:8g} {disp.I_plus:14.6g} {ex.I_plus:14.6g} {ex.I_minus:12.6g} {ex.I_zero:12.6g}")


if __name__ == "__main__":
    main()
