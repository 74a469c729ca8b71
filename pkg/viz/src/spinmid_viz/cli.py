"""Command line: spinmid-viz plot --kind <k> --in <file> --out <img>."""

from __future__ import annotations

import argparse
import sys

from .io import SchemaError
from .plots import KINDS, PlotRequest, plot


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinmid-viz", description="Plot spinmid output files")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plot")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="input_path", required=True, help="trajectory/convergence/compare CSV")
    p.add_argument("--out", dest="output_path", required=True, help="output image path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        out = plot(PlotRequest(kind=args.kind, input_path=args.input_path, output_path=args.output_path))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(str(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
