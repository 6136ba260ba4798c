"""Command-line entry point: adrf-plots render --kind ... --in ... --out ..."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, SchemaError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adrf-plots",
        description="Render static figures from benchmark result CSVs.")
    sub = parser.add_subparsers(dest="command", required=True)
    rp = sub.add_parser("render", help="render one figure")
    rp.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    rp.add_argument("--in", dest="input_csv", required=True,
                    help="input CSV (for evt_panel: any of the "
                         "tail-diagnostic CSVs; siblings are found by name)")
    rp.add_argument("--out", dest="output_path", required=True,
                    help="output image path")
    rp.add_argument("--metric", default=None,
                    help="metric column for result-table figures "
                         "(default rmse_level)")
    rp.add_argument("--vector", action="store_true",
                    help="write SVG instead of the default fixed-DPI PNG")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    options = {}
    if args.metric:
        options["metric"] = args.metric
    if args.vector:
        options["vector"] = True
    spec = FigureSpec(figure_kind=args.kind, input_csv=args.input_csv,
                      output_path=args.output_path, options=options)
    try:
        path = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
