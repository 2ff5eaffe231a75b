"""Render one figure from scenario outputs, deterministically.

The output PNG depends only on the recipe and the input files: the Agg
backend draws off-screen, fonts are pinned to the DejaVu family that ships
with matplotlib, and the PNG metadata is fixed, so identical inputs yield
byte-identical images. No physics is recomputed here; every plotted number
comes straight from an input file.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import InputError, RecipeError
from .readers import Table, WignerGrid, read_table, read_wigner
from .recipe import FigureRecipe, SeriesSpec

CONTOUR_FRACTIONS = (0.1, 0.3, 0.5, 0.7, 0.9)

_COLORS = plt.get_cmap("tab10").colors

_RC = {
    "font.family": "DejaVu Sans",
    "mathtext.fontset": "dejavusans",
    "font.size": 10.0,
    "figure.dpi": 100.0,
    "savefig.dpi": 100.0,
    "lines.linewidth": 1.5,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.framealpha": 1.0,
}


def contour_levels(values: np.ndarray) -> np.ndarray:
    """Contour levels at fixed fractions of the grid maximum."""
    peak = float(np.max(values))
    if peak <= 0.0:
        raise InputError("grid maximum must be positive to place contour levels")
    return peak * np.asarray(CONTOUR_FRACTIONS)


def _format_group(value) -> str:
    if isinstance(value, float) and value == int(value):
        return str(int(value))
    return str(value)


def group_series(table: Table, series: SeriesSpec) -> list[tuple[str, np.ndarray, np.ndarray]]:
    """Split a table into (label, x, y) series, one per group_by value.

    Rows are ordered by x within each series so line plots are well formed;
    values are taken verbatim from the table.
    """
    if not table.rows:
        raise InputError(f"{table.path}: table has no data rows")
    x = table.numeric_column(series.x)
    y = table.numeric_column(series.y)
    if series.group_by is None:
        order = np.argsort(x, kind="stable")
        return [("", x[order], y[order])]
    keys = table.column(series.group_by)
    distinct = set(keys)
    if all(isinstance(k, float) for k in distinct):
        ordered = sorted(distinct)
    else:
        ordered = sorted(distinct, key=_format_group)
    out = []
    for key in ordered:
        mask = np.asarray([k == key for k in keys])
        order = np.argsort(x[mask], kind="stable")
        label = f"{series.group_by} = {_format_group(key)}"
        out.append((label, x[mask][order], y[mask][order]))
    return out


def _axis_label(recipe_label: str | None, table: Table, column: str) -> str:
    if recipe_label is not None:
        return recipe_label
    unit = table.unit(column)
    return f"{column} ({unit})" if unit else column


def _input_label(spec, fallback: str) -> str:
    return spec.label if spec.label is not None else fallback


def _render_contour(recipe: FigureRecipe, fig) -> None:
    grids: list[tuple[str, WignerGrid]] = []
    for spec in recipe.inputs:
        label = _input_label(spec, Path(spec.path).stem)
        grids.append((label, read_wigner(spec.path)))
    axes = fig.subplots(1, len(grids), squeeze=False)[0]
    for ax, (label, grid) in zip(axes, grids):
        # values[i, j] = W(x_i, p_j); contour wants Z[row=p, col=x].
        ax.contour(
            grid.x_axis,
            grid.p_axis,
            grid.values.T,
            levels=contour_levels(grid.values),
            colors=[_COLORS[0]],
            linewidths=1.2,
        )
        ax.set_xlabel(recipe.x_label if recipe.x_label is not None else "x (qu)")
        ax.set_ylabel(recipe.y_label if recipe.y_label is not None else "p (qu)")
        ax.set_title(label)
        ax.set_aspect("equal")


def _render_table(recipe: FigureRecipe, fig) -> None:
    ax = fig.subplots()
    multi = len(recipe.inputs) > 1
    first_table: Table | None = None
    labeled = 0
    idx = 0
    for spec in recipe.inputs:
        table = read_table(spec.path)
        if first_table is None:
            first_table = table
        for label, x, y in group_series(table, recipe.series):
            if multi:
                prefix = _input_label(spec, Path(spec.path).stem)
                label = f"{prefix}: {label}" if label else prefix
            color = _COLORS[idx % len(_COLORS)]
            if recipe.kind == "curve-family":
                ax.plot(x, y, label=label or None, color=color)
            else:
                ax.scatter(x, y, label=label or None, color=color, s=18.0)
            labeled += bool(label)
            idx += 1
    ax.set_xlabel(_axis_label(recipe.x_label, first_table, recipe.series.x))
    ax.set_ylabel(_axis_label(recipe.y_label, first_table, recipe.series.y))
    if labeled:
        ax.legend()


def render(recipe: FigureRecipe) -> Path:
    """Render the recipe and return the written image path."""
    if recipe.kind not in ("contour", "curve-family", "scatter"):
        raise RecipeError(f"unknown figure kind {recipe.kind!r}")
    with matplotlib.rc_context(_RC):
        if recipe.kind == "contour":
            width = 3.4 * len(recipe.inputs)
            fig = plt.figure(figsize=(width, 3.4))
        else:
            fig = plt.figure(figsize=(5.0, 3.6))
        try:
            if recipe.kind == "contour":
                _render_contour(recipe, fig)
            else:
                _render_table(recipe, fig)
            if recipe.title is not None:
                fig.suptitle(recipe.title)
            fig.tight_layout()
            out = Path(recipe.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            fig.savefig(out, format="png", metadata={"Software": "plotkit"})
        finally:
            plt.close(fig)
    return out
