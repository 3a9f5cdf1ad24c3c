"""Firing curves at alpha = 0.38 and 0.39 from the PDE and the particle system.

    python scripts/figure1.py --out out/figure1 --seed 0 [--N 100000]
"""

import argparse
import sys

from meanfield_if.cli import run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/figure1")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--N", type=int, default=100_000)
    ap.add_argument("--no-particles", action="store_true")
    args = ap.parse_args()
    argv = ["figure1", "--out", args.out, "--seed", str(args.seed), "--N", str(args.N),
            "--plot-stub"]
    if not args.no_particles:
        argv.append("--particles")
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
