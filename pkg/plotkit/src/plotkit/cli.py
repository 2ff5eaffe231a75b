"""Command line: render figures from recipe files."""

from __future__ import annotations

import argparse
import sys

from .errors import InputError, RecipeError
from .recipe import load_recipe
from .render import render

EXIT_OK = 0
EXIT_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render figures from scenario CSV tables and Wigner JSON grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    cmd = sub.add_parser("render", help="render one figure from a recipe file")
    cmd.add_argument("--recipe", required=True, help="figure recipe TOML file")
    cmd.add_argument("--out", help="override the [figure] out path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        recipe = load_recipe(args.recipe, out_override=args.out)
        out = render(recipe)
    except RecipeError as exc:
        print(f"recipe error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"wrote figure: {out}", file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
