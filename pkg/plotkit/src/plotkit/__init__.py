"""Recipe-driven figure rendering for scenario CSV tables and Wigner grids."""

from .errors import InputError, RecipeError
from .readers import Table, WignerGrid, read_table, read_wigner
from .recipe import FigureRecipe, InputSpec, SeriesSpec, load_recipe, recipe_from_mapping
from .render import CONTOUR_FRACTIONS, contour_levels, group_series, render

__version__ = "0.1.0"

__all__ = [
    "CONTOUR_FRACTIONS",
    "FigureRecipe",
    "InputError",
    "InputSpec",
    "RecipeError",
    "SeriesSpec",
    "Table",
    "WignerGrid",
    "contour_levels",
    "group_series",
    "load_recipe",
    "read_table",
    "read_wigner",
    "recipe_from_mapping",
    "render",
    "__version__",
]
