"""Shared helpers for building test inputs."""

import numpy as np

from rsqueeze import GaussianState


def random_physical_state(rng: np.random.Generator, n_modes: int) -> GaussianState:
    """Random mixed Gaussian state: cov = A@A.T + vacuum, random mean.

    A@A.T is positive semidefinite, so the covariance dominates the vacuum
    and every symplectic eigenvalue is at least 1/2.
    """
    d = 2 * n_modes
    a = rng.normal(0.0, 0.45, (d, d))
    cov = a @ a.T + 0.5 * np.eye(d)
    mean = rng.normal(0.0, 1.0, d)
    return GaussianState(mean, cov)
