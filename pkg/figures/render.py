#!/usr/bin/env python3
"""Render one publication-style figure from simulation artifacts.

Usage: render.py <figure-id> --in <dir> --out <file> [options]

Figure ids: density-slice, firing-map, relaxation, dispersion, mode-patterns,
bifurcation, pattern-gallery, refinement. Inputs are located inside the input
directory by their conventional artifact names; a sidecar CSV of exactly the
plotted values is written next to the image.
"""

import argparse
import sys

from gridfield_figures import RENDERERS, InputError


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="render.py", description=__doc__)
    ap.add_argument("figure", choices=sorted(RENDERERS))
    ap.add_argument("--in", dest="indir", required=True, help="artifact directory")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--state", default="state_final.gcnf",
                    help="state dump name (density-slice)")
    ap.add_argument("--s-value", type=float, default=0.0,
                    help="activity level of the plotted slice")
    ap.add_argument("--beta", type=int, default=0, choices=range(4),
                    help="population index of the plotted slice")
    ap.add_argument("--s-max", type=float, default=1.3,
                    help="activity-domain bound of the dumps")
    args = ap.parse_args(argv)

    kwargs = {}
    if args.figure == "density-slice":
        kwargs = {"state": args.state, "s_value": args.s_value,
                  "beta": args.beta, "s_max": args.s_max}
    elif args.figure in ("pattern-gallery",):
        kwargs = {"s_value": args.s_value, "beta": args.beta, "s_max": args.s_max}
    try:
        RENDERERS[args.figure](args.indir, args.out, **kwargs)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} and {args.out}.sidecar.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
