"""Multimode Gaussian states: sources, channels, and phase-space evaluation.

States are value objects (mean vector + covariance matrix) in the interleaved
ordering (x1, p1, x2, p2, ...) with vacuum variance 1/2; see `conventions`.
All operations return new states and never mutate their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .conventions import SYMMETRY_RTOL, SYMPLECTIC_TOL, VACUUM_VARIANCE
from .errors import NumericalDegeneracyError

__all__ = [
    "GaussianState",
    "EprParams",
    "vacuum",
    "epr_state",
    "tmsv",
    "ghz_like",
    "apply_loss",
    "rotate",
    "displace",
    "wigner_at",
    "quad_variance",
    "squeezing_db",
    "purity",
    "marginal",
    "symplectic_eigenvalues",
    "quad_selector",
    "rotation_matrix",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


def rotation_matrix(theta: float) -> np.ndarray:
    """2x2 frame-rotation matrix: new x axis reads cos(theta)x + sin(theta)p."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Gaussian state of ``n_modes`` optical modes.

    Parameters
    ----------
    mean : array of shape (2n,)
        Quadrature means, ordered (x1, p1, x2, p2, ...).
    cov : array of shape (2n, 2n)
        Symmetric covariance matrix in the same ordering, vacuum variance 1/2.

    Construction validates symmetry, finiteness, and the uncertainty relation
    (every symplectic eigenvalue >= 1/2 up to a small tolerance); the stored
    arrays are copies and are marked read-only.
    """

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1 or mean.size == 0 or mean.size % 2 != 0:
            raise ValueError(f"mean must have even positive length, got shape {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"cov shape {cov.shape} does not match mean length {mean.size}")
        if not np.all(np.isfinite(mean)) or not np.all(np.isfinite(cov)):
            raise ValueError("mean and cov entries must be finite")
        scale = np.abs(cov).max()
        if scale > 0 and np.abs(cov - cov.T).max() > SYMMETRY_RTOL * scale:
            raise ValueError("cov is not symmetric")
        cov = 0.5 * (cov + cov.T)
        nu_min = symplectic_eigenvalues(cov).min()
        if nu_min < VACUUM_VARIANCE - SYMPLECTIC_TOL:
            raise ValueError(
                f"cov violates the uncertainty relation: min symplectic eigenvalue {nu_min!r}"
            )
        object.__setattr__(self, "mean", _frozen(mean))
        object.__setattr__(self, "cov", _frozen(cov))

    @property
    def n_modes(self) -> int:
        return self.mean.size // 2

    def mode_mean(self, mode: int) -> np.ndarray:
        """The (x, p) mean of one mode."""
        _check_mode(self, mode)
        return self.mean[2 * mode : 2 * mode + 2].copy()

    def mode_cov(self, mode: int) -> np.ndarray:
        """The 2x2 covariance block of one mode."""
        _check_mode(self, mode)
        sl = slice(2 * mode, 2 * mode + 2)
        return self.cov[sl, sl].copy()


@dataclass(frozen=True)
class EprParams:
    """Source and channel parameters of a (possibly lossy) EPR state.

    v_s and v_a are the squeezed and anti-squeezed quadrature variances of
    the source (vacuum = 1/2, pure when v_a*v_s = 1/4); eta_a and eta_b are
    the transmission efficiencies of the two modes.
    """

    v_s: float
    v_a: float
    eta_a: float = 1.0
    eta_b: float = 1.0

    def __post_init__(self) -> None:
        for name in ("v_s", "v_a", "eta_a", "eta_b"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if not 0.0 < self.v_s <= VACUUM_VARIANCE:
            raise ValueError(f"v_s must lie in (0, 1/2], got {self.v_s!r}")
        if self.v_a < VACUUM_VARIANCE:
            raise ValueError(f"v_a must be >= 1/2, got {self.v_a!r}")
        # 1e-12 slack: pure-state parameters built from exp(2r), exp(-2r) round-trip in floats.
        if self.v_a * self.v_s < 0.25 - 1e-12:
            raise ValueError(
                f"v_a*v_s = {self.v_a * self.v_s!r} < 1/4 violates the uncertainty relation"
            )
        if not 0.0 <= self.eta_a <= 1.0 or not 0.0 <= self.eta_b <= 1.0:
            raise ValueError("eta_a and eta_b must lie in [0, 1]")


def _check_mode(state: GaussianState, mode: int) -> None:
    if not isinstance(mode, (int, np.integer)) or isinstance(mode, bool):
        raise ValueError(f"mode must be an integer index, got {mode!r}")
    if not 0 <= mode < state.n_modes:
        raise ValueError(f"mode {mode} out of range for {state.n_modes} modes")


def _check_r(r: float) -> float:
    r = float(r)
    if not math.isfinite(r) or r < 0:
        raise ValueError(f"squeezing parameter must be finite and >= 0, got {r!r}")
    return r


def vacuum(n_modes: int) -> GaussianState:
    """The n-mode vacuum: zero mean, covariance (1/2)*identity."""
    if not isinstance(n_modes, (int, np.integer)) or n_modes < 1:
        raise ValueError(f"n_modes must be a positive integer, got {n_modes!r}")
    n = int(n_modes)
    return GaussianState(np.zeros(2 * n), VACUUM_VARIANCE * np.eye(2 * n))


def epr_state(params: EprParams) -> GaussianState:
    """Two-mode entangled state after independent loss on each mode.

    Diagonal blocks are isotropic with variance [eta*(v_a+v_s) + (1-eta)]/2;
    the x quadratures are correlated and the p quadratures anti-correlated
    with magnitude sqrt(eta_a*eta_b)*(v_a-v_s)/2.
    """
    var_a = (params.eta_a * (params.v_a + params.v_s) + (1.0 - params.eta_a)) / 2.0
    var_b = (params.eta_b * (params.v_a + params.v_s) + (1.0 - params.eta_b)) / 2.0
    cross = math.sqrt(params.eta_a * params.eta_b) * (params.v_a - params.v_s) / 2.0
    cov = np.diag([var_a, var_a, var_b, var_b]).astype(float)
    cov[0, 2] = cov[2, 0] = cross
    cov[1, 3] = cov[3, 1] = -cross
    return GaussianState(np.zeros(4), cov)


def tmsv(r: float) -> GaussianState:
    """Pure two-mode squeezed vacuum with squeezing parameter r >= 0."""
    r = _check_r(r)
    return epr_state(
        EprParams(
            v_s=math.exp(-2.0 * r) * VACUUM_VARIANCE,
            v_a=math.exp(2.0 * r) * VACUUM_VARIANCE,
        )
    )


def ghz_like(n_modes: int, r: float) -> GaussianState:
    """N-mode state with correlated positions and total-momentum squeezing.

    The phase-space density is exp(-x.Qx.x - p.Qp.p) where Qx penalizes
    relative positions by exp(2r) and the mean position by exp(-2r), and Qp
    does the reverse; the covariance is computed by numerically inverting
    those quadratic forms.  Reduces to tmsv(r) at n_modes = 2.
    """
    if not isinstance(n_modes, (int, np.integer)) or n_modes < 2:
        raise ValueError(f"n_modes must be an integer >= 2, got {n_modes!r}")
    r = _check_r(r)
    n = int(n_modes)
    p_mean = np.full((n, n), 1.0 / n)
    p_rel = np.eye(n) - p_mean
    q_x = math.exp(-2.0 * r) * p_mean + math.exp(2.0 * r) * p_rel
    q_p = math.exp(2.0 * r) * p_mean + math.exp(-2.0 * r) * p_rel
    sigma_x = 0.5 * np.linalg.inv(q_x)
    sigma_p = 0.5 * np.linalg.inv(q_p)
    cov = np.zeros((2 * n, 2 * n))
    xs = np.arange(0, 2 * n, 2)
    ps = np.arange(1, 2 * n, 2)
    cov[np.ix_(xs, xs)] = sigma_x
    cov[np.ix_(ps, ps)] = sigma_p
    return GaussianState(np.zeros(2 * n), cov)


def apply_loss(state: GaussianState, mode: int, eta: float) -> GaussianState:
    """Mix one mode with vacuum on a beam splitter of transmission eta."""
    _check_mode(state, mode)
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta!r}")
    n2 = state.mean.size
    scale = np.ones(n2)
    scale[2 * mode : 2 * mode + 2] = math.sqrt(eta)
    mean = scale * state.mean
    cov = state.cov * np.outer(scale, scale)
    sl = slice(2 * mode, 2 * mode + 2)
    cov[sl, sl] += (1.0 - eta) * VACUUM_VARIANCE * np.eye(2)
    return GaussianState(mean, cov)


def rotate(state: GaussianState, mode: int, theta: float) -> GaussianState:
    """Rotate the measurement frame of one mode by theta.

    The new x quadrature of the mode reads out cos(theta)x + sin(theta)p, so
    quad_variance(rotate(s, m, t), m, 0.0) == quad_variance(s, m, t).
    """
    _check_mode(state, mode)
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta!r}")
    big = np.eye(state.mean.size)
    sl = slice(2 * mode, 2 * mode + 2)
    big[sl, sl] = rotation_matrix(theta)
    return GaussianState(big @ state.mean, big @ state.cov @ big.T)


def displace(state: GaussianState, mode: int, dx: float, dp: float) -> GaussianState:
    """Shift one mode's mean by (dx, dp); the covariance is unchanged."""
    _check_mode(state, mode)
    if not (math.isfinite(dx) and math.isfinite(dp)):
        raise ValueError("dx and dp must be finite")
    mean = state.mean.copy()
    mean[2 * mode] += dx
    mean[2 * mode + 1] += dp
    return GaussianState(mean, state.cov)


def wigner_at(state: GaussianState, point: np.ndarray) -> np.ndarray:
    """Phase-space density at one or more points.

    `point` has shape (2n,) or (..., 2n); the result is a scalar or an array
    of the leading shape.  Normalized so the full phase-space integral is 1.
    """
    pts = np.asarray(point, dtype=float)
    n2 = state.mean.size
    if pts.shape[-1:] != (n2,):
        raise ValueError(f"point must have trailing length {n2}, got shape {pts.shape}")
    sign, logdet = np.linalg.slogdet(state.cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalDegeneracyError("covariance matrix is numerically singular")
    try:
        prec = np.linalg.inv(state.cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalDegeneracyError("covariance matrix is numerically singular") from exc
    d = pts - state.mean
    quad = np.einsum("...i,ij,...j->...", d, prec, d)
    log_norm = -0.5 * (n2 * math.log(2.0 * math.pi) + logdet)
    out = np.exp(log_norm - 0.5 * quad)
    return out if out.ndim else float(out)


def quad_variance(state: GaussianState, mode: int, theta: float) -> float:
    """Variance of the quadrature cos(theta)x + sin(theta)p of one mode."""
    _check_mode(state, mode)
    u = np.array([math.cos(theta), math.sin(theta)])
    return float(u @ state.mode_cov(mode) @ u)


def squeezing_db(variance: float) -> float:
    """Quadrature variance expressed in dB relative to the vacuum's 1/2."""
    variance = float(variance)
    if not variance > 0:
        raise ValueError(f"variance must be positive, got {variance!r}")
    return 10.0 * math.log10(variance / VACUUM_VARIANCE)


def purity(state: GaussianState) -> float:
    """(1/2)^n / sqrt(det cov); equals 1 exactly for pure states."""
    sign, logdet = np.linalg.slogdet(state.cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise NumericalDegeneracyError("covariance matrix is numerically singular")
    return float(math.exp(state.n_modes * math.log(VACUUM_VARIANCE) - 0.5 * logdet))


def marginal(state: GaussianState, modes: list[int]) -> GaussianState:
    """Reduced state of the selected modes, order preserved."""
    modes = [int(m) for m in modes]
    if len(modes) == 0:
        raise ValueError("modes must not be empty")
    if len(set(modes)) != len(modes):
        raise ValueError(f"duplicate mode indices in {modes!r}")
    for m in modes:
        _check_mode(state, m)
    idx = np.array([2 * m + k for m in modes for k in (0, 1)])
    return GaussianState(state.mean[idx], state.cov[np.ix_(idx, idx)])


def symplectic_eigenvalues(cov: np.ndarray | GaussianState) -> np.ndarray:
    """Symplectic spectrum of a covariance matrix (ascending, length n)."""
    if isinstance(cov, GaussianState):
        cov = cov.cov
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0] // 2
    omega = np.zeros_like(cov)
    for m in range(n):
        omega[2 * m, 2 * m + 1] = 1.0
        omega[2 * m + 1, 2 * m] = -1.0
    ev = np.linalg.eigvals(1j * omega @ cov)
    # Eigenvalues come in +/- pairs; keep one representative per pair.
    return np.sort(np.abs(ev))[::2][:n]


def quad_selector(n_modes: int, mode: int, theta: float) -> np.ndarray:
    """Row vector u with u @ state.mean = mean of cos(theta)x + sin(theta)p."""
    u = np.zeros(2 * n_modes)
    u[2 * mode] = math.cos(theta)
    u[2 * mode + 1] = math.sin(theta)
    return u
