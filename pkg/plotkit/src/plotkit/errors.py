"""Error types: recipe problems vs input-file problems."""


class RecipeError(ValueError):
    """A figure recipe is malformed or inconsistent."""


class InputError(ValueError):
    """An input file is missing, unparseable, or fails its schema."""
