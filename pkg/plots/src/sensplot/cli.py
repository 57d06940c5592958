"""Batch figure script: --csv/--label pairs, --delta, --out, --log-y."""

from __future__ import annotations

import argparse
import sys

from .render import FigureSpec, SchemaError, render_sensitivity_figure


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sensplot", description=__doc__)
    parser.add_argument("--csv", action="append", required=True,
                        help="training CSV, one per model variant (repeatable)")
    parser.add_argument("--label", action="append", required=True,
                        help="legend label per --csv (repeatable)")
    parser.add_argument("--delta", type=float, required=True,
                        help="graph hyperbolicity value for the title")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--log-y", action="store_true", help="log-scale y axis")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        render_sensitivity_figure(
            FigureSpec(
                csv_paths=args.csv,
                labels=args.label,
                delta=args.delta,
                out_path=args.out,
                log_y=args.log_y,
            )
        )
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


def entry():
    sys.exit(main())
