"""ftl-lwr-plot: render grid or density figures from an artifact directory."""

import argparse
import sys
from typing import Optional, Sequence

from .io import InputError
from .render import PlotSpec, render_density, render_grid


def _parse_times(raw: Optional[str]):
    if raw is None:
        return None
    try:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError:
        raise InputError(f"--times must be comma-separated numbers, got {raw!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ftl-lwr-plot",
        description="Render figures from ftl-lwr CSV artifacts.",
    )
    parser.add_argument("--kind", choices=("grid", "density"), required=True)
    parser.add_argument("--in", dest="in_dir", metavar="DIR", required=True,
                        help="directory holding grid.csv / density.csv")
    parser.add_argument("--out", metavar="FILE", required=True,
                        help="output image path (extension picks the format)")
    parser.add_argument("--times", metavar="T1,T2,...",
                        help="density only: times to draw (default: all in file)")
    args = parser.parse_args(argv)
    try:
        if args.kind == "grid":
            if args.times is not None:
                raise InputError("--times applies to --kind density only")
            render_grid(PlotSpec(args.in_dir, args.out, "grid"))
        else:
            spec = PlotSpec(args.in_dir, args.out, "density", _parse_times(args.times))
            render_density(spec)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
