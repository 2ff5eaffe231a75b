"""Error and warning types shared across the package.

Invalid arguments raise the builtin ``ValueError``; the classes here cover
failure modes that are numerical rather than caller mistakes.
"""

from __future__ import annotations


class NumericalDegeneracyError(ArithmeticError):
    """A covariance matrix is singular (or a measured variance collapsed)."""


class WindowUnderflowError(ArithmeticError):
    """The post-selection window carries no representable probability mass."""


class AccuracyError(ArithmeticError):
    """A numerical quadrature failed to reach the requested accuracy."""


class DensityOnlyWarning(UserWarning):
    """A zero-width projection has zero acceptance probability.

    Emitted when a probability is requested for an ideal (delta) projection;
    callers should use the outcome density instead.
    """


class LowStatisticsWarning(UserWarning):
    """Fewer surviving samples than needed for reliable error bars."""
