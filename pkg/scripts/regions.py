"""Blow-up classification over an alpha grid (particles and PDE must agree).

    python scripts/regions.py --out out/regions --seed 0 --workers 2
"""

import argparse
import sys

import numpy as np

from meanfield_if.cli import run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/regions")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--N", type=int, default=20_000)
    ap.add_argument("--x0", type=float, default=0.8)
    ap.add_argument("--T", type=float, default=4.0)
    ap.add_argument("--step", type=float, default=0.05)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    alphas = ",".join(f"{a:.3f}" for a in np.arange(args.step, 1.0 - 1e-9, args.step))
    return run(["regions", "--alphas", alphas, "--x0", str(args.x0), "--T", str(args.T),
                "--N", str(args.N), "--seed", str(args.seed), "--workers", str(args.workers),
                "--out", args.out])


if __name__ == "__main__":
    sys.exit(main())
