"""Unit and ordering conventions used across the package.

Everything is expressed in dimensionless quadrature units with the vacuum
variance fixed at 1/2.  Consequences that every module relies on:

* A pure squeezed quadrature has variance ``exp(-2r)/2`` and its conjugate
  ``exp(2r)/2``, where ``r >= 0`` is the squeezing parameter.
* Squeezing in decibels is ``10*log10(V / (1/2))``, i.e. the vacuum sits at
  0 dB and squeezed variances are negative dB.
* Mean vectors and covariance matrices are ordered ``(x1, p1, x2, p2, ...)``
  so each mode occupies a contiguous 2x2 block.
* The uncertainty relation reads "every symplectic eigenvalue >= 1/2".
* Wigner functions are normalized probability densities over phase space
  (integral 1), so the vacuum peak value is ``1/pi`` per mode.
* Rotations are frame rotations: ``rotate(state, mode, theta)`` re-expresses
  a mode in axes turned by ``theta``, so the new x quadrature reads out
  ``cos(theta)*x + sin(theta)*p``.
* The overlap fidelity against a pure target carries a ``2*pi`` factor per
  mode so that identical pure states score exactly 1.
"""

from __future__ import annotations

import math

VACUUM_VARIANCE = 0.5

# Numerical tolerances shared by validation code and tests.
SYMMETRY_RTOL = 1e-12          # covariance symmetry, relative to max entry
SYMPLECTIC_TOL = 1e-9          # slack below 1/2 for symplectic eigenvalues


def variance_to_db(variance: float) -> float:
    """Convert a quadrature variance to dB relative to the vacuum."""
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance!r}")
    return 10.0 * math.log10(variance / VACUUM_VARIANCE)


def db_to_variance(db: float) -> float:
    """Inverse of :func:`variance_to_db`."""
    return VACUUM_VARIANCE * 10.0 ** (db / 10.0)


def squeezed_variance(r: float) -> float:
    """Variance of the squeezed quadrature of a pure state with parameter r."""
    return math.exp(-2.0 * r) * VACUUM_VARIANCE


def antisqueezed_variance(r: float) -> float:
    """Variance of the anti-squeezed quadrature for parameter r."""
    return math.exp(2.0 * r) * VACUUM_VARIANCE


def r_from_db(db: float) -> float:
    """Squeezing parameter whose pure squeezed quadrature sits at `db` dB.

    `db` must be <= 0; -10 dB maps to r = ln(10)/2 ~ 1.1513.
    """
    if db > 0:
        raise ValueError(f"squeezing level must be <= 0 dB, got {db!r}")
    # + 0.0 normalizes the signed zero of db = 0.0.
    return -db * math.log(10.0) / 20.0 + 0.0


def db_from_r(r: float) -> float:
    """Squeezing level in dB of a pure state with parameter r."""
    return -20.0 * r * math.log10(math.e)
