"""Ratio of the exact harmonic commutator norm to its envelope across hbar.

Prints the overall spread per (d, p), the min/max per regime in the two
extreme hbar decades, and the change along lines of fixed (beta hbar, mu)
between consecutive hbar = 2^-k.  Usage:

    python scripts/harmonic_envelope_ratios.py [--kmax 13] [--low-t-below displayed]
"""
import argparse
import itertools
import math

import numpy as np

from fermicomm.harmonic_spectral import HarmonicSpectrum, quantum_envelope, schatten_commutator_sum
from fermicomm.model_params import PhysicalParams, classify_regime


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--kmax", type=int, default=10)
    ap.add_argument("--low-t-below", choices=["corrected", "displayed"], default="corrected")
    args = ap.parse_args()

    ks = range(1, args.kmax + 1)
    etas = np.logspace(-2, 2, 9)
    rows = []
    for d, p, k, eta, mu in itertools.product([1, 2, 3], [1, 2, 4], ks, etas, [-1.0, 0.5, 1.0, 2.0]):
        prm = PhysicalParams(2.0 ** -k, eta / 2.0 ** -k, mu, d)
        s = schatten_commutator_sum(HarmonicSpectrum(prm), p)
        e = quantum_envelope(prm, p, low_t_below=args.low_t_below)
        rows.append((d, p, k, float(eta), mu, classify_regime(prm).value, e.label,
                     s.log_value - e.log_value))

    print("spread max/min of S_p / envelope per (d, p)")
    for d, p in itertools.product([1, 2, 3], [1, 2, 4]):
        v = [r[-1] for r in rows if r[:2] == (d, p)]
        print(f"  d={d} p={p}: {math.exp(max(v) - min(v)):9.3f}")

    lo_dec, hi_dec = set(ks[:4]), set(ks[-4:])
    print(f"\nmin and max per regime, hbar = 2^-k for k in {sorted(lo_dec)} and {sorted(hi_dec)}")
    for d, p in itertools.product([1, 2, 3], [1, 2, 4]):
        for regime in ("ClassicalLike", "DeepQuantum"):
            lo = [r[-1] for r in rows if r[:2] == (d, p) and r[5] == regime and r[2] in lo_dec]
            hi = [r[-1] for r in rows if r[:2] == (d, p) and r[5] == regime and r[2] in hi_dec]
            print(f"  d={d} p={p} {regime:13s} min {math.exp(min(lo)):.4g} -> {math.exp(min(hi)):.4g}"
                  f"  max {math.exp(max(lo)):.4g} -> {math.exp(max(hi)):.4g}")

    print("\nlargest change per envelope branch along fixed (beta hbar, mu), k -> k+1")
    line = {}
    for d, p, k, eta, mu, _, label, v in rows:
        line.setdefault((d, p, eta, mu, label), {})[k] = v
    for k in ks[:-1]:
        worst = {}
        for (d, p, eta, mu, label), vals in line.items():
            if k in vals and k + 1 in vals:
                ch = abs(math.expm1(vals[k + 1] - vals[k]))
                worst[label] = max(worst.get(label, 0.0), ch)
        print(f"  k={k:2d}: " + "  ".join(f"{lab} {w:.2%}" for lab, w in sorted(worst.items())))


if __name__ == "__main__":
    main()
