"""Command-line entry point: ``plots render <spec.json> [...]``."""

from __future__ import annotations

import argparse
import sys

from .render import SchemaError, render
from .spec import SpecError, load_spec


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="Render figures from rydsol CSV outputs."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    render_cmd = sub.add_parser("render", help="render one or more plot specs")
    render_cmd.add_argument("specs", nargs="+", metavar="spec.json")
    args = parser.parse_args(argv)

    status = 0
    for path in args.specs:
        try:
            result = render(load_spec(path))
        except (SpecError, SchemaError) as exc:
            print(f"{path}: error: {exc}", file=sys.stderr)
            status = 1
        else:
            print(f"{path}: wrote {result.path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
