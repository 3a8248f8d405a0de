#!/usr/bin/env python3
"""Scan the sleeping top's spin rate and record what the certifier says.

Writes one CSV row per spin rate with the verdict, the searched multipliers
and the restricted spectrum edge, alongside the closed-form block-test
margin whose sign change marks the true threshold (2*sqrt(I1*Mgl)/I3 for
the standard parameters).

Usage: python3 scripts/omega_scan.py [--out omega_scan.csv]
"""

import argparse
import csv

import numpy as np

from emcstab import certify, emc, instantiate_system, known_equilibria, lie, releq


def block_test_margin(mgl, i1, i3, omega):
    # peak of the transverse block determinant over the free multiplier
    return mgl - (i3 * omega) ** 2 / (4 * i1)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="omega_scan.csv")
    parser.add_argument("--lo", type=float, default=1.5)
    parser.add_argument("--hi", type=float, default=3.0)
    parser.add_argument("--step", type=float, default=0.05)
    parser.add_argument("--Mgl", type=float, default=1.0)
    parser.add_argument("--I1", type=float, default=1.0)
    parser.add_argument("--I3", type=float, default=1.0)
    args = parser.parse_args()

    omegas = np.round(np.arange(args.lo, args.hi + args.step / 2, args.step), 10)
    threshold = 2.0 * np.sqrt(args.I1 * args.Mgl) / args.I3
    print(f"predicted threshold omega* = {threshold:.4f}")

    rows = []
    for omega in omegas:
        params = {"Mgl": args.Mgl, "I1": args.I1, "I3": args.I3, "omega": float(omega)}
        sys = instantiate_system("lagrange_top", params)
        seed = next(s for s in known_equilibria("lagrange_top", params) if s.label == "sleeping")
        re = releq.make_relative_equilibrium(
            sys, seed.z, lie.AlgebraElement(sys.group, seed.xi)
        )
        cert = certify(emc.EmcProblem(sys=sys, re=re))
        margin = block_test_margin(args.Mgl, args.I1, args.I3, float(omega))
        rows.append(
            {
                "omega": float(omega),
                "verdict": cert.verdict,
                "block_margin": margin,
                "spectrum_min": min(cert.spectrum),
                "spectrum_max": max(cert.spectrum),
                "lam2": cert.lam[1] if len(cert.lam) > 1 else float("nan"),
                "sigma": "" if cert.sigma is None else cert.sigma,
            }
        )
        mark = "*" if (cert.verdict == "CertifiedStable") != (margin < 0) else " "
        print(
            f"  omega {omega:5.2f}  {cert.verdict:<26} "
            f"block margin {margin:+.4f} {mark}"
        )

    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out}")


if __name__ == "__main__":
    main()
