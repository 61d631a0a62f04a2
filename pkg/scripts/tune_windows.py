#!/usr/bin/env python3
"""Regenerate the integration-window rules stored in the parameter catalog.

For each pulse shape this scans boxcar (start, stop) pairs for the
single-stage SNR, then fits the per-stage stop increment on longer chains.
The catalog keeps windows as (start, stop + increment*(N-1)) capped at the
simulation horizon; this script exists so those frozen numbers can be
reproduced or re-tuned after a catalog change.

Runs at a coarser step than production since only the argmax matters.
"""

import argparse

import numpy as np

from photondet import cli, presets
from photondet.config import ExperimentConfig


def snr_for(shape, n, window, dt):
    cfg = ExperimentConfig(shape=shape, n_transmons=n, window=window, dt=dt)
    return cli.deterministic_snr(cfg).snr_main


def tune_shape(shape, dt, grid=0.3):
    t_end1 = presets.t_end_for(shape, 1)
    starts = np.arange(0.0, t_end1 - 2.0, grid)
    spans = np.arange(2.0, 8.01, max(grid, 0.5))
    best = (-1.0, None)
    for a in starts:
        for w in spans:
            b = a + w
            if b > t_end1:
                continue
            s = snr_for(shape, 1, (a, b), dt)
            if s > best[0]:
                best = (s, (round(a, 2), round(b, 2)))
    (a, b) = best[1]
    print(f"{shape}: N=1 window ({a}, {b}) snr={best[0]:.4f}"
          f"  [catalog {presets.WINDOW_RULE[shape]}]")

    # per-stage stop increment, fitted at N = 4
    best_inc = (-1.0, None)
    for inc in (1.0, 1.25, 1.5, 1.75, 2.0):
        stop = min(b + inc * 3, presets.t_end_for(shape, 4))
        s = snr_for(shape, 4, (a, stop), dt)
        if s > best_inc[0]:
            best_inc = (s, inc)
    print(f"{shape}: stop increment {best_inc[1]}/stage"
          f" (N=4 snr={best_inc[0]:.4f})")
    return (a, b), best_inc[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dt", type=float, default=2e-3)
    ap.add_argument("--grid", type=float, default=0.3,
                    help="window-start grid spacing")
    ap.add_argument("--shape", choices=presets.SHAPES, action="append",
                    help="restrict to one shape (repeatable)")
    args = ap.parse_args()
    for shape in (args.shape or sorted(presets.SHAPES)):
        tune_shape(shape, args.dt, args.grid)


if __name__ == "__main__":
    main()
