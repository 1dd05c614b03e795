"""Command line entry: one figure per invocation.

Reads the simulator's CSV logs named by --in, renders the figure kind
named by --kind, and writes the image named by --out.  Exit status is 0
on success and 1 on any schema or rendering error.
"""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, FigureError, FigureSpec, render
from .schema import SchemaError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softbounce-figs",
        description="Render static figures from the bouncing ball simulator's CSV logs",
    )
    parser.add_argument("--kind", required=True, choices=KINDS, help="figure to draw")
    parser.add_argument(
        "--in",
        dest="inputs",
        required=True,
        nargs="+",
        metavar="CSV",
        help="input tables; trajectory takes a sampled trajectory and an event log",
    )
    parser.add_argument("--out", required=True, help="output image (.png, .svg, or .pdf)")
    parser.add_argument("--title", help="axes title")
    parser.add_argument(
        "--gamma",
        type=float,
        help="weight to spring-force ratio; contact-sequence uses it "
        "to place the equilibrium height",
    )
    parser.add_argument(
        "--projection",
        choices=("2d", "3d"),
        default="2d",
        help="contact-sequence projection",
    )
    parser.add_argument(
        "--timestamp",
        action="store_true",
        help="stamp the render time on the page; off keeps the bytes "
        "a pure function of the inputs",
    )
    parser.add_argument("--dpi", type=int, default=150, help="raster resolution")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        inputs=tuple(args.inputs),
        out=args.out,
        title=args.title,
        gamma=args.gamma,
        projection=args.projection,
        timestamp=args.timestamp,
        dpi=args.dpi,
    )
    try:
        out = render(spec)
    except (SchemaError, FigureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"kind={spec.kind} out={out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
