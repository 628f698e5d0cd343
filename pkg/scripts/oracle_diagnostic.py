"""Dense truncated-basis check of the magnetic ladder commutator sums.

Defaults reproduce hbar = 0.5, beta = 3, mu = 4, b = sqrt 2, p = 2 with the
per-axis trust margin; the basis then has 43 x 7 x 16 states and the run
takes about eight minutes on one core.

    python scripts/oracle_diagnostic.py [--margin max] [--beta inf]
"""
import argparse
import math
import time

from fermicomm.magnetic_spectral import MagneticSpectrum, magnetic_commutator_sum
from fermicomm.matrix_oracle import build_magnetic, oracle_commutator_norm, required_levels
from fermicomm.model_params import PhysicalParams


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--hbar", type=float, default=0.5)
    ap.add_argument("--beta", type=float, default=3.0)
    ap.add_argument("--mu", type=float, default=4.0)
    ap.add_argument("--b", type=float, default=math.sqrt(2.0))
    ap.add_argument("--p", type=float, nargs="+", default=[2.0])
    ap.add_argument("--margin", choices=["max", "axis"], default="axis")
    args = ap.parse_args()

    prm = PhysicalParams(args.hbar, args.beta, args.mu, 3, args.b)
    n = required_levels(prm, "magnetic", margin=args.margin)
    print(f"levels per axis {n}, basis size {math.prod(n)}", flush=True)
    t0 = time.perf_counter()
    state = build_magnetic(prm, n, margin=args.margin)
    print(f"built in {time.perf_counter() - t0:.1f} s", flush=True)
    spec = MagneticSpectrum(prm)
    for p in args.p:
        for j in (1, 2, 3):
            o = oracle_commutator_norm(state, f"a{j}", p).value
            e = magnetic_commutator_sum(spec, j, p).value
            print(f"p={p:g} j={j}: oracle {o:.15g}  lattice {e:.15g}  rel {abs(o - e) / e:.2e}",
                  flush=True)
    print(f"total {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
