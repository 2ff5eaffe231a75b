"""Conditioning shared Gaussian states on homodyne projective measurements.

Covers ideal (zero-width) projections via exact Gaussian conditioning, the
post-selected finite-window variant with closed-form mixture moments, chains
of projections on distinct modes, and the closed-form predictions for the
displacement and squeezing of the remotely prepared state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .conventions import VACUUM_VARIANCE
from .errors import DensityOnlyWarning, NumericalDegeneracyError, WindowUnderflowError
from .gaussian import GaussianState, marginal, quad_selector

__all__ = [
    "HomodyneProjection",
    "WindowedConditional",
    "condition_exact",
    "condition_windowed",
    "success_probability",
    "condition_sequence",
    "remaining_modes",
    "windowed_marginal",
    "predicted_displacement",
    "predicted_conditional_squeezing",
]

# Gauss-Legendre node count for the mixture Wigner evaluator.
_WIGNER_NODES = 160


@dataclass(frozen=True)
class HomodyneProjection:
    """One homodyne projective measurement.

    mode : index of the measured mode
    theta : quadrature angle in radians (0 reads x, pi/2 reads p)
    alpha : projective value the outcome is conditioned on
    half_width : acceptance half-width; 0 means an ideal delta projection,
        otherwise outcomes in [alpha - half_width, alpha + half_width] are kept.
    """

    mode: int
    theta: float
    alpha: float
    half_width: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.mode, (int, np.integer)) or isinstance(self.mode, bool) or self.mode < 0:
            raise ValueError(f"mode must be a non-negative integer, got {self.mode!r}")
        if not (math.isfinite(self.theta) and math.isfinite(self.alpha)):
            raise ValueError("theta and alpha must be finite")
        if not self.half_width >= 0.0:
            raise ValueError(f"half_width must be >= 0, got {self.half_width!r}")


@dataclass(frozen=True)
class WindowedConditional:
    """Post-selected state for a finite acceptance window.

    The true state is a continuous mixture of Gaussian conditionals and is
    generally non-Gaussian; `moments` carries its exact mean and covariance,
    `wigner_at` evaluates its exact phase-space density, and `response` is
    the shift of the surviving modes' means per unit of measured outcome.
    """

    moments: GaussianState
    success_probability: float
    window: HomodyneProjection
    response: np.ndarray
    _kernel: "_ConditionKernel" = field(repr=False)

    @property
    def n_modes(self) -> int:
        return self.moments.n_modes

    def wigner_at(self, point: np.ndarray) -> np.ndarray:
        """Exact mixture density at points of shape (..., 2n)."""
        pts = np.asarray(point, dtype=float)
        n2 = self.moments.mean.size
        if pts.shape[-1:] != (n2,):
            raise ValueError(f"point must have trailing length {n2}, got shape {pts.shape}")
        k = self._kernel
        lo = self.window.alpha - self.window.half_width
        hi = self.window.alpha + self.window.half_width
        # Clip the quadrature range to where the outcome density lives; the
        # window may extend far beyond the marginal's support.
        sd = math.sqrt(k.var_y)
        lo = max(lo, k.mean_y - 12.0 * sd)
        hi = min(hi, k.mean_y + 12.0 * sd)
        if not hi > lo:
            # The whole window sits in a region of negligible density; the
            # mixture collapses onto the nearest edge's conditional Gaussian.
            y_nodes = np.array([min(max(k.mean_y, self.window.alpha - self.window.half_width),
                                    self.window.alpha + self.window.half_width)])
            y_weights = np.array([1.0])
        else:
            nodes, weights = np.polynomial.legendre.leggauss(_WIGNER_NODES)
            y_nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * nodes
            dens = np.exp(-0.5 * (y_nodes - k.mean_y) ** 2 / k.var_y) / math.sqrt(
                2.0 * math.pi * k.var_y
            )
            y_weights = 0.5 * (hi - lo) * weights * dens
            y_weights = y_weights / y_weights.sum()

        prec = np.linalg.inv(k.cov_rem)
        sign, logdet = np.linalg.slogdet(k.cov_rem)
        log_norm = -0.5 * (k.cov_rem.shape[0] * math.log(2.0 * math.pi) + logdet)
        flat = pts.reshape(-1, n2)
        out = np.zeros(flat.shape[0])
        for y, w in zip(y_nodes, y_weights):
            mu = k.mean_rem + k.response * (y - k.mean_y)
            d = flat - mu
            quad = np.einsum("ij,jk,ik->i", d, prec, d)
            out += w * np.exp(log_norm - 0.5 * quad)
        out = out.reshape(pts.shape[:-1])
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class _ConditionKernel:
    """Pieces of the Gaussian conditioning rule reused by window math."""

    mean_y: float
    var_y: float
    mean_rem: np.ndarray
    cov_rem: np.ndarray
    response: np.ndarray
    keep: np.ndarray


def _conditioning_kernel(state: GaussianState, proj: HomodyneProjection) -> _ConditionKernel:
    if state.n_modes < 2:
        raise ValueError("conditioning requires at least two modes")
    if proj.mode >= state.n_modes:
        raise ValueError(f"mode {proj.mode} out of range for {state.n_modes} modes")
    u = quad_selector(state.n_modes, proj.mode, proj.theta)
    var_y = float(u @ state.cov @ u)
    if var_y <= 0 or not math.isfinite(var_y):
        raise NumericalDegeneracyError(
            f"measured quadrature has non-positive variance {var_y!r}"
        )
    mean_y = float(u @ state.mean)
    cross = state.cov @ u
    keep = np.array(
        [i for i in range(state.mean.size) if i // 2 != proj.mode], dtype=int
    )
    cov_full = state.cov - np.outer(cross, cross) / var_y
    cov_rem = cov_full[np.ix_(keep, keep)]
    cov_rem = 0.5 * (cov_rem + cov_rem.T)
    return _ConditionKernel(
        mean_y=mean_y,
        var_y=var_y,
        mean_rem=state.mean[keep].copy(),
        cov_rem=cov_rem,
        response=cross[keep] / var_y,
        keep=keep,
    )


def condition_exact(
    state: GaussianState, proj: HomodyneProjection
) -> tuple[GaussianState, float]:
    """Collapse onto an exact quadrature outcome of one mode.

    Conditions the joint Gaussian on cos(theta)x + sin(theta)p = alpha for the
    measured mode, drops that mode, and returns the remaining modes' state
    together with the outcome's probability density (a density, not a
    probability: ideal projections have zero acceptance probability).
    """
    if proj.half_width != 0.0:
        raise ValueError("condition_exact requires half_width = 0; use condition_windowed")
    k = _conditioning_kernel(state, proj)
    mean = k.mean_rem + k.response * (proj.alpha - k.mean_y)
    density = math.exp(-0.5 * (proj.alpha - k.mean_y) ** 2 / k.var_y) / math.sqrt(
        2.0 * math.pi * k.var_y
    )
    return GaussianState(mean, k.cov_rem), density


def _window_mass(mean_y: float, var_y: float, alpha: float, delta: float) -> float:
    sd = math.sqrt(var_y)
    lo = (alpha - delta - mean_y) / sd
    hi = (alpha + delta - mean_y) / sd
    # Difference of survival functions is accurate in either far tail.
    if lo >= 0:
        return float(stats.norm.sf(lo) - stats.norm.sf(hi))
    if hi <= 0:
        return float(stats.norm.cdf(hi) - stats.norm.cdf(lo))
    return float(stats.norm.cdf(hi) - stats.norm.cdf(lo))


def condition_windowed(state: GaussianState, proj: HomodyneProjection) -> WindowedConditional:
    """Post-select on an outcome window [alpha - delta, alpha + delta].

    The survivors form a mixture of the exact conditionals over the window;
    its mean and covariance follow from the truncated-Gaussian moments of
    the measured quadrature and are exact, not sampled.
    """
    if not proj.half_width > 0.0:
        raise ValueError("condition_windowed requires half_width > 0")
    k = _conditioning_kernel(state, proj)
    mass = _window_mass(k.mean_y, k.var_y, proj.alpha, proj.half_width)
    if mass < 1e-300:
        sd = math.sqrt(k.var_y)
        raise WindowUnderflowError(
            "acceptance window carries no probability mass: "
            f"window center sits {abs(proj.alpha - k.mean_y) / sd:.1f} standard "
            f"deviations from the outcome mean with half-width {proj.half_width / sd:.3g} sd"
        )
    sd = math.sqrt(k.var_y)
    a = (proj.alpha - proj.half_width - k.mean_y) / sd
    b = (proj.alpha + proj.half_width - k.mean_y) / sd
    trunc = stats.truncnorm(a, b, loc=k.mean_y, scale=sd)
    t_mean = float(trunc.mean())
    t_var = float(trunc.var())
    mean = k.mean_rem + k.response * (t_mean - k.mean_y)
    cov = k.cov_rem + np.outer(k.response, k.response) * t_var
    return WindowedConditional(
        moments=GaussianState(mean, cov),
        success_probability=min(1.0, mass),
        window=proj,
        response=k.response.copy(),
        _kernel=k,
    )


def success_probability(state: GaussianState, proj: HomodyneProjection) -> float:
    """Probability that the measured outcome lands inside the window.

    A zero-width projection has zero probability mass; that case returns 0.0
    and emits DensityOnlyWarning to direct callers at the outcome density.
    """
    k = _conditioning_kernel(state, proj)
    if proj.half_width == 0.0:
        warnings.warn(
            "zero-width projection has zero acceptance probability; "
            "use the outcome density from condition_exact",
            DensityOnlyWarning,
            stacklevel=2,
        )
        return 0.0
    return min(1.0, _window_mass(k.mean_y, k.var_y, proj.alpha, proj.half_width))


def remaining_modes(n_modes: int, projections: list[HomodyneProjection]) -> list[int]:
    """Original indices of the modes that survive a projection chain."""
    measured = {p.mode for p in projections}
    return [m for m in range(n_modes) if m not in measured]


def condition_sequence(
    state: GaussianState, projections: list[HomodyneProjection]
) -> tuple[GaussianState, float]:
    """Apply exact projections on distinct modes, in order.

    Mode indices in `projections` refer to the original state's numbering.
    Returns the joint conditional state of the surviving modes and the
    product of the step outcome densities (the joint outcome density).
    """
    if len(projections) == 0:
        raise ValueError("projections must not be empty")
    modes = [p.mode for p in projections]
    if len(set(modes)) != len(modes):
        raise ValueError(f"projections address duplicate modes: {modes!r}")
    if any(m >= state.n_modes for m in modes):
        raise ValueError(f"projection mode out of range for {state.n_modes} modes")
    if any(p.half_width != 0.0 for p in projections):
        raise ValueError("condition_sequence requires all half_width = 0")
    if len(projections) >= state.n_modes:
        raise ValueError("at least one mode must survive the projection chain")
    current = state
    labels = list(range(state.n_modes))
    density = 1.0
    for proj in projections:
        local = labels.index(proj.mode)
        step = HomodyneProjection(mode=local, theta=proj.theta, alpha=proj.alpha)
        current, d = condition_exact(current, step)
        density *= d
        labels.pop(local)
    return current, density


def windowed_marginal(wc: WindowedConditional, modes: list[int]) -> WindowedConditional:
    """Reduced post-selected state of a subset of the surviving modes.

    Mode indices refer to the surviving modes' numbering (the numbering of
    `wc.moments`). Success probability and window are unchanged; mixture
    structure is preserved so `wigner_at` stays exact on the reduced state.
    """
    sub_moments = marginal(wc.moments, modes)
    idx = np.array([2 * m + k for m in modes for k in (0, 1)], dtype=int)
    k = wc._kernel
    sub_kernel = _ConditionKernel(
        mean_y=k.mean_y,
        var_y=k.var_y,
        mean_rem=k.mean_rem[idx].copy(),
        cov_rem=k.cov_rem[np.ix_(idx, idx)].copy(),
        response=k.response[idx].copy(),
        keep=k.keep[idx].copy(),
    )
    return WindowedConditional(
        moments=sub_moments,
        success_probability=wc.success_probability,
        window=wc.window,
        response=k.response[idx].copy(),
        _kernel=sub_kernel,
    )


def predicted_displacement(r: float, alpha: float) -> float:
    """Closed-form mean of the prepared state: alpha * tanh(2r)."""
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise ValueError(f"squeezing parameter must be finite and >= 0, got {r!r}")
    return float(alpha) * math.tanh(2.0 * r)


def predicted_conditional_squeezing(r: float) -> float:
    """Squeezing parameter of the prepared state: log(cosh(2r))/2.

    The prepared squeezed variance is exp(-2s)/2 = 1/(2cosh(2r)) for the
    returned value s; always s < r for r > 0.
    """
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise ValueError(f"squeezing parameter must be finite and >= 0, got {r!r}")
    x = 2.0 * r
    # log(cosh x) without overflow for large x.
    return 0.5 * (abs(x) + math.log1p(math.exp(-2.0 * abs(x))) - math.log(2.0))
