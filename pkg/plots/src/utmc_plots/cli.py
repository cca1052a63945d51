"""plot <kind> --in <files> --out <path> [--levels ...] [--thresholds report.json]

Kinds: curves, tau_vs_f, heatmap, layer_panels. Inputs must follow the
documented utmc CSV/JSON schemas; schema violations name the offending
column and no output file is written.
"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureSpec, render
from .io import SchemaError


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="plot", description=__doc__)
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="FILE")
    ap.add_argument("--out", required=True, help="output image path (.png or .svg)")
    ap.add_argument("--levels", type=int, nargs="*", default=None,
                    help="levels to draw in curve panels (default: all)")
    ap.add_argument("--summary-level", type=int, default=0,
                    help="level used by tau_vs_f and heatmap (default 0)")
    ap.add_argument("--thresholds", default=None, help="ThresholdReport JSON for overlays")
    ap.add_argument("--dpi", type=int, default=130)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=args.inputs,
        out=args.out,
        levels=args.levels,
        thresholds=args.thresholds,
        summary_level=args.summary_level,
        dpi=args.dpi,
    )
    try:
        out = render(spec)
    except (SchemaError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
