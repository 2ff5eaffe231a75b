"""Figure recipes: a TOML description of one figure to render.

Same config dialect as the scenario CLI: named sections, snake_case keys,
unknown keys rejected. Paths are used as written (relative to the working
directory), matching how the scenario CLI treats its [output] section.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import RecipeError

FIGURE_KINDS = ("contour", "curve-family", "scatter")


def _as_str(section: str, key: str, value: Any, choices: tuple[str, ...] | None = None) -> str:
    if not isinstance(value, str):
        raise RecipeError(f"[{section}] {key} must be a string, got {value!r}")
    if choices is not None and value not in choices:
        raise RecipeError(
            f"[{section}] {key} must be one of {', '.join(choices)}; got {value!r}"
        )
    return value


def _check_keys(section: str, raw: dict, allowed: tuple[str, ...]) -> None:
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise RecipeError(
            f"unknown key(s) in [{section}]: {', '.join(unknown)}; "
            f"allowed: {', '.join(allowed)}"
        )


@dataclass(frozen=True)
class InputSpec:
    path: str
    label: str | None = None


@dataclass(frozen=True)
class SeriesSpec:
    """Which table columns become the plotted series."""

    x: str
    y: str
    group_by: str | None = None


@dataclass(frozen=True)
class FigureRecipe:
    """Everything needed to render one figure from scenario outputs."""

    kind: str
    inputs: tuple[InputSpec, ...]
    out: str
    title: str | None = None
    x_label: str | None = None
    y_label: str | None = None
    series: SeriesSpec | None = None


def recipe_from_mapping(raw: dict, *, out_override: str | None = None) -> FigureRecipe:
    if not isinstance(raw, dict):
        raise RecipeError("recipe must be a table at top level")
    _check_keys("top level", raw, ("figure", "input", "axes", "series"))

    if "figure" not in raw or not isinstance(raw["figure"], dict):
        raise RecipeError("recipe requires a [figure] section")
    fig = raw["figure"]
    _check_keys("figure", fig, ("kind", "title", "out"))
    if "kind" not in fig:
        raise RecipeError("[figure] requires a kind")
    kind = _as_str("figure", "kind", fig["kind"], FIGURE_KINDS)
    title = _as_str("figure", "title", fig["title"]) if "title" in fig else None
    out = out_override
    if out is None and "out" in fig:
        out = _as_str("figure", "out", fig["out"])
    if out is None:
        raise RecipeError("[figure] requires an out path (or pass --out)")

    entries = raw.get("input")
    if not isinstance(entries, list) or not entries:
        raise RecipeError("recipe requires at least one [[input]]")
    inputs = []
    for i, entry in enumerate(entries):
        section = f"input[{i}]"
        if not isinstance(entry, dict):
            raise RecipeError(f"[{section}] must be a table")
        _check_keys(section, entry, ("path", "label"))
        if "path" not in entry:
            raise RecipeError(f"[{section}] requires a path")
        path = _as_str(section, "path", entry["path"])
        label = _as_str(section, "label", entry["label"]) if "label" in entry else None
        inputs.append(InputSpec(path=path, label=label))

    x_label = y_label = None
    if "axes" in raw:
        axes = raw["axes"]
        if not isinstance(axes, dict):
            raise RecipeError("[axes] must be a table")
        _check_keys("axes", axes, ("x_label", "y_label"))
        if "x_label" in axes:
            x_label = _as_str("axes", "x_label", axes["x_label"])
        if "y_label" in axes:
            y_label = _as_str("axes", "y_label", axes["y_label"])

    series = None
    if "series" in raw:
        ser = raw["series"]
        if not isinstance(ser, dict):
            raise RecipeError("[series] must be a table")
        _check_keys("series", ser, ("x", "y", "group_by"))
        for key in ("x", "y"):
            if key not in ser:
                raise RecipeError(f"[series] requires {key}")
        series = SeriesSpec(
            x=_as_str("series", "x", ser["x"]),
            y=_as_str("series", "y", ser["y"]),
            group_by=(
                _as_str("series", "group_by", ser["group_by"])
                if "group_by" in ser
                else None
            ),
        )

    if kind == "contour" and series is not None:
        raise RecipeError("[series] does not apply to contour figures")
    if kind != "contour" and series is None:
        raise RecipeError(f"{kind} figures require a [series] section")

    return FigureRecipe(
        kind=kind,
        inputs=tuple(inputs),
        out=out,
        title=title,
        x_label=x_label,
        y_label=y_label,
        series=series,
    )


def load_recipe(path: str | Path, *, out_override: str | None = None) -> FigureRecipe:
    path = Path(path)
    if not path.is_file():
        raise RecipeError(f"{path}: recipe file not found")
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise RecipeError(f"{path}: invalid TOML ({exc})") from None
    return recipe_from_mapping(raw, out_override=out_override)
