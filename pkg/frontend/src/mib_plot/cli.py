"""mib-plot <figure-id|all> --in <dir> --out <dir> --format png|svg"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import FIGURES, FigureSpec, RenderError, render, render_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mib-plot", description=__doc__)
    parser.add_argument("figure", choices=(*FIGURES, "all"))
    parser.add_argument("--in", dest="in_dir", type=Path, required=True,
                        help="directory holding the CSVs and manifest.json")
    parser.add_argument("--out", type=Path, default=None,
                        help="output directory (defaults to the input directory)")
    parser.add_argument("--format", choices=("png", "svg"), default="png")
    args = parser.parse_args(argv)
    out_dir = args.out if args.out is not None else args.in_dir
    try:
        if args.figure == "all":
            written = render_all(args.in_dir, out_dir, args.format)
        else:
            written = [render_one(args, out_dir)]
        for path in written:
            print(path)
        return 0
    except RenderError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def render_one(args, out_dir: Path) -> Path:
    prefix = {"fig2": "fig2_", "fig3": "optimal_sweep_", "fig4": "gradient",
              "fig7": "interp_compare_"}[args.figure]
    inputs = tuple(sorted(args.in_dir.glob(f"{prefix}*.csv")))
    if not inputs:
        raise RenderError(f"no {prefix}*.csv files in {args.in_dir}")
    spec = FigureSpec(figure=args.figure, inputs=inputs,
                      output=out_dir / f"{args.figure}.{args.format}", fmt=args.format)
    return render(spec)


if __name__ == "__main__":
    sys.exit(main())
