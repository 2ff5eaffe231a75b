"""Simulated homodyne measurement runs: sampling, post-selection, estimation.

Samples simultaneous single-quadrature shot records from the joint Gaussian
model with a counter-based RNG (numpy Philox, one stream per 65536-shot
block keyed by (seed, block index), so results do not depend on how blocks
are scheduled), selects shots whose outcome falls in an acceptance window,
and estimates the surviving modes' conditional statistics with jackknife
standard errors.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericalDegeneracyError
from .gaussian import GaussianState, quad_selector

__all__ = [
    "MeasurementPlan",
    "SampleBatch",
    "SelectionResult",
    "ConditionalEstimate",
    "sample_joint",
    "postselect",
    "estimate_conditional",
    "tomography_fit",
    "export_batch_csv",
]

BLOCK_SHOTS = 65536
_JACKKNIFE_BLOCKS = 100

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MeasurementPlan:
    """Which quadrature each mode's detector reads, how often, and the seed."""

    angles: tuple[float, ...]
    shots: int
    seed: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if len(self.angles) == 0 or not all(math.isfinite(a) for a in self.angles):
            raise ValueError("angles must be a non-empty tuple of finite floats")
        if not isinstance(self.shots, (int, np.integer)) or self.shots < 1:
            raise ValueError(f"shots must be a positive integer, got {self.shots!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass(frozen=True)
class SampleBatch:
    """Shot records: one row per shot, one column per mode."""

    outcomes: np.ndarray
    plan: MeasurementPlan
    state_tag: str

    def __post_init__(self) -> None:
        outcomes = np.asarray(self.outcomes, dtype=float)
        if outcomes.shape != (self.plan.shots, len(self.plan.angles)):
            raise ValueError(
                f"outcomes shape {outcomes.shape} does not match plan "
                f"({self.plan.shots} shots x {len(self.plan.angles)} modes)"
            )
        if not np.all(np.isfinite(outcomes)):
            raise ValueError("outcomes must be finite")
        outcomes = outcomes.copy()
        outcomes.flags.writeable = False
        object.__setattr__(self, "outcomes", outcomes)


@dataclass(frozen=True)
class SelectionResult:
    """Surviving rows of a post-selection window on one mode's column."""

    indices: np.ndarray
    fraction: float
    mode: int
    alpha: float
    delta: float

    @property
    def is_empty(self) -> bool:
        return self.indices.size == 0


@dataclass(frozen=True)
class ConditionalEstimate:
    """Sample moments of a surviving column with jackknife standard errors."""

    mean: float
    variance: float
    se_mean: float
    se_variance: float
    n_selected: int
    low_statistics: bool


def _sampling_transform(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        evals, vecs = np.linalg.eigh(cov)
        if evals.max() <= 0:
            raise NumericalDegeneracyError("measured joint covariance is not positive")
        evals = np.clip(evals, 0.0, None)
        return vecs * np.sqrt(evals)


def sample_joint(state: GaussianState, plan: MeasurementPlan) -> SampleBatch:
    """Draw i.i.d. shots of one quadrature per mode from the joint Gaussian.

    Identical (state, plan) inputs produce bit-identical batches; the first
    blocks of a longer run with the same seed coincide with a shorter run's.
    """
    if len(plan.angles) != state.n_modes:
        raise ValueError(
            f"plan has {len(plan.angles)} angles but the state has {state.n_modes} modes"
        )
    rows = np.stack(
        [quad_selector(state.n_modes, m, a) for m, a in enumerate(plan.angles)]
    )
    mean = rows @ state.mean
    cov = rows @ state.cov @ rows.T
    transform = _sampling_transform(cov)
    n = state.n_modes
    out = np.empty((plan.shots, n))
    for block, start in enumerate(range(0, plan.shots, BLOCK_SHOTS)):
        count = min(BLOCK_SHOTS, plan.shots - start)
        key = np.array([plan.seed, block], dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        z = rng.standard_normal((count, n))
        out[start : start + count] = mean + z @ transform.T
    digest = hashlib.sha256(state.mean.tobytes() + state.cov.tobytes()).hexdigest()[:12]
    tag = f"gaussian-{state.n_modes}mode-{digest}"
    return SampleBatch(outcomes=out, plan=plan, state_tag=tag)


def postselect(batch: SampleBatch, mode: int, alpha: float, delta: float) -> SelectionResult:
    """Keep shots whose `mode` outcome lies within `delta` of `alpha`.

    An empty survivor set is reported through the result (fraction 0), not
    raised, so callers can decide how to proceed.
    """
    if not 0 <= mode < len(batch.plan.angles):
        raise ValueError(f"mode {mode} out of range")
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta!r}")
    if not math.isfinite(alpha):
        raise ValueError(f"alpha must be finite, got {alpha!r}")
    keep = np.abs(batch.outcomes[:, mode] - alpha) < delta
    indices = np.nonzero(keep)[0]
    indices.flags.writeable = False
    return SelectionResult(
        indices=indices,
        fraction=indices.size / batch.plan.shots,
        mode=mode,
        alpha=float(alpha),
        delta=float(delta),
    )


def _jackknife(values: np.ndarray) -> tuple[float, float, float, float]:
    """Mean, unbiased variance, and leave-one-block-out standard errors."""
    n = values.size
    mean = float(values.mean())
    variance = float(values.var(ddof=1))
    if n < 4:
        # Too few samples for leave-one-out variance errors; fall back to
        # the normal-theory formulas.
        se_mean = math.sqrt(variance / n)
        se_var = variance * math.sqrt(2.0 / (n - 1))
        return mean, variance, se_mean, se_var
    blocks = min(_JACKKNIFE_BLOCKS, n)
    edges = np.linspace(0, n, blocks + 1, dtype=int)
    sums = np.add.reduceat(values, edges[:-1])
    sqsums = np.add.reduceat(values * values, edges[:-1])
    counts = np.diff(edges)
    total_s = values.sum()
    total_q = float(values @ values)
    rest_n = n - counts
    rest_s = total_s - sums
    rest_q = total_q - sqsums
    means_j = rest_s / rest_n
    vars_j = (rest_q - rest_s * rest_s / rest_n) / (rest_n - 1)
    se_mean = math.sqrt((blocks - 1) / blocks * np.sum((means_j - means_j.mean()) ** 2))
    se_var = math.sqrt((blocks - 1) / blocks * np.sum((vars_j - vars_j.mean()) ** 2))
    return mean, variance, se_mean, se_var


def estimate_conditional(
    batch: SampleBatch, selection: SelectionResult, bob_mode: int
) -> ConditionalEstimate:
    """Sample mean/variance of a surviving column with jackknife errors."""
    if not 0 <= bob_mode < len(batch.plan.angles):
        raise ValueError(f"mode {bob_mode} out of range")
    if selection.is_empty:
        raise ValueError("selection is empty; nothing to estimate")
    values = batch.outcomes[selection.indices, bob_mode]
    if values.size < 2:
        raise ValueError("need at least 2 surviving samples to estimate a variance")
    mean, variance, se_mean, se_var = _jackknife(values)
    return ConditionalEstimate(
        mean=mean,
        variance=variance,
        se_mean=se_mean,
        se_variance=se_var,
        n_selected=int(values.size),
        low_statistics=values.size < 100,
    )


def tomography_fit(
    selected: Sequence[tuple[SampleBatch, SelectionResult]], mode: int
) -> GaussianState:
    """Fit a single-mode Gaussian to per-angle selected moments.

    Each batch contributes the sample mean and variance of `mode`'s column
    at that batch's measurement angle; the angle-to-moment maps are linear
    in the unknown mean vector and covariance entries, so both fits are
    least squares.  Sampling noise can push the fitted covariance slightly
    outside the physical cone; it is then scaled up to the boundary and the
    adjustment is logged.
    """
    if len(selected) < 3:
        raise ValueError("need batches at >= 3 distinct angles")
    rows_mean = []
    rows_var = []
    obs_mean = []
    obs_var = []
    for batch, selection in selected:
        if selection.is_empty:
            raise ValueError("every selection must be non-empty")
        theta = batch.plan.angles[mode]
        values = batch.outcomes[selection.indices, mode]
        if values.size < 2:
            raise ValueError("need at least 2 surviving samples per angle")
        c, s = math.cos(theta), math.sin(theta)
        rows_mean.append([c, s])
        rows_var.append([c * c, s * s, 2.0 * s * c])
        obs_mean.append(values.mean())
        obs_var.append(values.var(ddof=1))
    a_var = np.array(rows_var)
    if np.linalg.matrix_rank(a_var, tol=1e-9) < 3:
        raise ValueError("rank-deficient angle set: need >= 3 angles distinct modulo pi")
    a_mean = np.array(rows_mean)
    mean_fit, *_ = np.linalg.lstsq(a_mean, np.array(obs_mean), rcond=None)
    var_fit, *_ = np.linalg.lstsq(a_var, np.array(obs_var), rcond=None)
    cov = np.array([[var_fit[0], var_fit[2]], [var_fit[2], var_fit[1]]])
    evals, vecs = np.linalg.eigh(cov)
    floor = 1e-9
    if evals[0] < floor:
        logger.info("tomography fit clipped covariance eigenvalues %s to %g", evals, floor)
        evals = np.clip(evals, floor, None)
        cov = (vecs * evals) @ vecs.T
    nu = math.sqrt(float(np.linalg.det(cov)))
    if nu < 0.5:
        scale = 0.5 * (1.0 + 1e-12) / nu
        logger.info(
            "tomography fit projected onto the physical cone: "
            "symplectic eigenvalue %.6g scaled by %.6g", nu, scale
        )
        cov = cov * scale
    return GaussianState(np.asarray(mean_fit, dtype=float), cov)


def export_batch_csv(batch: SampleBatch, path: str) -> None:
    """Write a batch as CSV with '#'-prefixed metadata lines."""
    n = len(batch.plan.angles)
    lines = [
        f"# state={batch.state_tag}",
        f"# seed={batch.plan.seed}",
        "# angles=" + ",".join(repr(a) for a in batch.plan.angles),
        f"# shots={batch.plan.shots}",
        "shot," + ",".join(f"mode{m}" for m in range(n)),
    ]
    for i, row in enumerate(batch.outcomes):
        lines.append(str(i) + "," + ",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
