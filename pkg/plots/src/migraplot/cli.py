"""Command line front end: migraplot --in results.csv --out figure.png --kind threshold_compare"""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, SchemaError, render


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="migraplot", description=__doc__)
    ap.add_argument("--in", dest="inputs", action="append", required=True,
                    help="input CSV (repeatable)")
    ap.add_argument("--out", required=True, help="output image path")
    ap.add_argument("--kind", choices=KINDS, required=True)
    ap.add_argument("--xlabel")
    ap.add_argument("--ylabel")
    ap.add_argument("--xscale", choices=["linear", "log"])
    ap.add_argument("--yscale", choices=["linear", "log"])
    ap.add_argument("--title")
    try:
        args = ap.parse_args(argv)
    except SystemExit:
        return 1
    spec = FigureSpec(inputs=tuple(args.inputs), kind=args.kind,
                      out=args.out, xlabel=args.xlabel, ylabel=args.ylabel,
                      xscale=args.xscale, yscale=args.yscale,
                      title=args.title)
    try:
        path = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
