#!/usr/bin/env python3
"""Regenerate every canned figure dataset in one go.

Thin loop over `photondet reproduce <figure>`; pass --traj/--dt to trade
accuracy for time on the trajectory-sampled figures.
"""

import argparse
import sys

from photondet import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", help="output root (default $PHOTONDET_OUT or ./runs)")
    ap.add_argument("--traj", type=int, help="trajectories per class")
    ap.add_argument("--dt", type=float, help="integrator step")
    ap.add_argument("figures", nargs="*", default=list(cli.FIGURES),
                    help=f"subset to run (default: all {len(cli.FIGURES)})")
    args = ap.parse_args()

    rc = 0
    for fig in args.figures:
        argv = ["reproduce", fig]
        if args.out:
            argv += ["--out", args.out]
        if args.traj:
            argv += ["--traj", str(args.traj)]
        if args.dt:
            argv += ["--dt", str(args.dt)]
        print(f"== {fig}")
        rc |= cli.main(argv)
    return rc


if __name__ == "__main__":
    sys.exit(main())
