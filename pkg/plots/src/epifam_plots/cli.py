"""Script entry point: turn experiment CSVs into figures.

Examples:
    epifam-plots --kind power-grid --input metrics.csv --out figures/power
    epifam-plots --kind bias-scatter --input records.csv --out figures/bias \
        --x-method cll --y-method lime-pair
    epifam-plots --kind sensitivity-scatter --input sensitivity_records.csv \
        --out figures/sensitivity

Each invocation writes <out>.png and <out>.svg.  Exit codes: 0 success,
1 I/O error, 2 bad arguments or missing CSV columns.
"""

from __future__ import annotations

import argparse
import sys

from epifam_plots.figures import FIGURE_KINDS, RISK_PARAMS, FigureSpec, MissingColumnsError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epifam-plots", description=__doc__.splitlines()[0])
    parser.add_argument("--kind", choices=FIGURE_KINDS, required=True)
    parser.add_argument("--input", action="append", required=True,
                        help="experiment CSV; repeat to pool several files")
    parser.add_argument("--out", required=True, help="output path stem (no extension)")
    parser.add_argument("--x-method", default="cll", help="bias-scatter x axis method")
    parser.add_argument("--y-method", default="lime-pair", help="bias-scatter y axis method")
    parser.add_argument("--parameters", default=",".join(RISK_PARAMS),
                        help="comma-separated parameter subset")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            kind=args.kind,
            inputs=tuple(args.input),
            output=args.out,
            x_method=args.x_method,
            y_method=args.y_method,
            parameters=tuple(p.strip() for p in args.parameters.split(",") if p.strip()),
            dpi=args.dpi,
        )
        png, svg = render(spec)
    except (MissingColumnsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {png} and {svg}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
