import math

import numpy as np
import pytest
from scipy import stats

from rsqueeze import (
    EprParams,
    GaussianState,
    HomodyneProjection,
    MeasurementPlan,
    SqueezedTarget,
    condition_windowed,
    epr_state,
    estimate_conditional,
    export_batch_csv,
    postselect,
    sample_joint,
    success_probability,
    target_state,
    tmsv,
    tomography_fit,
    vacuum,
)

R10 = math.log(10.0) / 2.0
BENCH = EprParams(v_s=0.24, v_a=1.3, eta_a=0.9, eta_b=0.9)


def _hs_cosine(s1: GaussianState, s2: GaussianState) -> float:
    """Normalized state-space overlap; exactly 1 iff the states coincide."""

    def overlap(a, b):
        s = a.cov + b.cov
        d = a.mean - b.mean
        return math.exp(-0.5 * float(d @ np.linalg.solve(s, d))) / math.sqrt(
            np.linalg.det(s)
        )

    return overlap(s1, s2) / math.sqrt(overlap(s1, s1) * overlap(s2, s2))


# --- sampling -----------------------------------------------------------------


def test_sample_vacuum_statistics():
    n = 1_000_000
    batch = sample_joint(vacuum(2), MeasurementPlan(angles=(0.0, math.pi / 2), shots=n, seed=7))
    se_mean = math.sqrt(0.5 / n)
    se_var = 0.5 * math.sqrt(2.0 / n)
    for col in range(2):
        assert abs(batch.outcomes[:, col].mean()) < 3 * se_mean
        assert abs(batch.outcomes[:, col].var(ddof=1) - 0.5) < 3 * se_var


def test_sample_tmsv_difference_quadrature_squeezed():
    r = 0.8
    n = 1_000_000
    batch = sample_joint(tmsv(r), MeasurementPlan(angles=(0.0, 0.0), shots=n, seed=11))
    diff = (batch.outcomes[:, 0] - batch.outcomes[:, 1]) / math.sqrt(2.0)
    target = math.exp(-2 * r) / 2.0
    se = target * math.sqrt(2.0 / n)
    assert abs(diff.var(ddof=1) - target) < 3 * se


def test_sample_angles_select_quadratures():
    n = 400_000
    batch = sample_joint(
        tmsv(0.9), MeasurementPlan(angles=(math.pi / 2, math.pi / 2), shots=n, seed=3)
    )
    v = math.cosh(1.8) / 2.0
    se = v * math.sqrt(2.0 / n)
    assert abs(batch.outcomes[:, 0].var(ddof=1) - v) < 3 * se
    # Anticorrelated momenta: the sum quadrature is squeezed.
    s = (batch.outcomes[:, 0] + batch.outcomes[:, 1]) / math.sqrt(2.0)
    target = math.exp(-1.8) / 2.0
    assert abs(s.var(ddof=1) - target) < 3 * target * math.sqrt(2.0 / n)


def test_sample_deterministic_for_fixed_seed():
    plan = MeasurementPlan(angles=(0.0, 0.0), shots=70_001, seed=123)
    a = sample_joint(epr_state(BENCH), plan)
    b = sample_joint(epr_state(BENCH), plan)
    assert np.array_equal(a.outcomes, b.outcomes)
    assert a.state_tag == b.state_tag


def test_sample_block_prefix_stability():
    # Extending a run re-derives earlier blocks identically: the stream is
    # keyed by (seed, block), not by total length.
    short = sample_joint(vacuum(1), MeasurementPlan(angles=(0.0,), shots=100_000, seed=9))
    long = sample_joint(vacuum(1), MeasurementPlan(angles=(0.0,), shots=150_000, seed=9))
    assert np.array_equal(long.outcomes[:100_000], short.outcomes)


def test_sample_seeds_decorrelated():
    n = 250_000
    a = sample_joint(vacuum(1), MeasurementPlan(angles=(0.0,), shots=n, seed=1))
    b = sample_joint(vacuum(1), MeasurementPlan(angles=(0.0,), shots=n, seed=2))
    corr = np.corrcoef(a.outcomes[:, 0], b.outcomes[:, 0])[0, 1]
    assert abs(corr) < 4.0 / math.sqrt(n)


def test_sample_validation():
    with pytest.raises(ValueError):
        MeasurementPlan(angles=(), shots=10, seed=0)
    with pytest.raises(ValueError):
        MeasurementPlan(angles=(0.0,), shots=0, seed=0)
    with pytest.raises(ValueError):
        MeasurementPlan(angles=(0.0,), shots=10, seed=-1)
    with pytest.raises(ValueError):
        sample_joint(vacuum(2), MeasurementPlan(angles=(0.0,), shots=10, seed=0))


# --- post-selection -------------------------------------------------------------


def test_postselect_wide_window_keeps_everything():
    batch = sample_joint(vacuum(1), MeasurementPlan(angles=(0.0,), shots=5000, seed=5))
    sel = postselect(batch, 0, 0.0, 1e6)
    assert sel.fraction == 1.0
    assert sel.indices.size == 5000


def test_postselect_empty_is_reported_not_raised():
    batch = sample_joint(vacuum(1), MeasurementPlan(angles=(0.0,), shots=1000, seed=5))
    sel = postselect(batch, 0, 50.0, 0.01)
    assert sel.is_empty
    assert sel.fraction == 0.0


def test_postselect_survival_matches_analytic_window():
    n = 1_000_000
    s = epr_state(BENCH)
    batch = sample_joint(s, MeasurementPlan(angles=(0.0, 0.0), shots=n, seed=42))
    sel = postselect(batch, 0, 0.0, 0.1)
    p = success_probability(s, HomodyneProjection(0, 0.0, 0.0, half_width=0.1))
    assert p == pytest.approx(0.092, abs=0.001)
    sigma = math.sqrt(p * (1 - p) / n)
    assert abs(sel.fraction - p) < 3 * sigma
    assert sel.fraction == pytest.approx(0.092, abs=0.001)


def test_postselect_halving_window_halves_survival():
    n = 1_000_000
    batch = sample_joint(epr_state(BENCH), MeasurementPlan(angles=(0.0, 0.0), shots=n, seed=17))
    wide = postselect(batch, 0, 0.0, 0.1).fraction
    narrow = postselect(batch, 0, 0.0, 0.05).fraction
    assert 0.47 < narrow / wide < 0.53


def test_postselect_validation():
    batch = sample_joint(vacuum(1), MeasurementPlan(angles=(0.0,), shots=100, seed=1))
    with pytest.raises(ValueError):
        postselect(batch, 1, 0.0, 0.1)
    with pytest.raises(ValueError):
        postselect(batch, 0, 0.0, 0.0)
    with pytest.raises(ValueError):
        postselect(batch, 0, math.nan, 0.1)


# --- conditional estimation -----------------------------------------------------


def test_estimate_prepared_phase_squeezing():
    # Narrow-window selection on one momentum record leaves the partner's
    # momentum squeezed at the conditional level.
    n = 10_000_000
    state = tmsv(R10)
    proj = HomodyneProjection(0, math.pi / 2, 0.0, half_width=0.01)
    batch = sample_joint(state, MeasurementPlan(angles=(math.pi / 2, math.pi / 2), shots=n, seed=73))
    sel = postselect(batch, 0, 0.0, 0.01)
    est = estimate_conditional(batch, sel, 1)
    ref = condition_windowed(state, proj).moments.cov[1, 1]
    assert ref == pytest.approx(1.0 / (2.0 * math.cosh(2 * R10)), abs=1e-4)
    assert abs(est.variance - ref) < 3 * est.se_variance
    assert abs(est.mean) < 3 * est.se_mean
    assert not est.low_statistics


def test_estimate_displaced_window_matches_analytic():
    n = 4_000_000
    state = epr_state(BENCH)
    proj = HomodyneProjection(0, 0.0, 1.0, half_width=0.1)
    batch = sample_joint(state, MeasurementPlan(angles=(0.0, 0.0), shots=n, seed=2024))
    sel = postselect(batch, 0, 1.0, 0.1)
    est = estimate_conditional(batch, sel, 1)
    wc = condition_windowed(state, proj)
    assert abs(est.mean - wc.moments.mean[0]) < 3 * est.se_mean
    assert abs(est.variance - wc.moments.cov[0, 0]) < 3 * est.se_variance


def test_estimate_unconditioned_column_sees_marginal():
    n = 1_000_000
    state = tmsv(0.9)
    batch = sample_joint(state, MeasurementPlan(angles=(0.0, 0.0), shots=n, seed=31))
    sel = postselect(batch, 0, 0.0, 1e9)
    est = estimate_conditional(batch, sel, 1)
    v = math.cosh(1.8) / 2.0
    assert est.n_selected == n
    assert abs(est.variance - v) < 3 * est.se_variance


def test_estimate_jackknife_errors_are_calibrated():
    # The reported standard errors must match the spread of independent
    # repetitions at the 2x level; grossly over- or under-sized bars fail.
    state = tmsv(0.7)
    means, variances, se_m, se_v = [], [], [], []
    for seed in range(30):
        batch = sample_joint(state, MeasurementPlan(angles=(0.0, 0.0), shots=40_000, seed=seed))
        sel = postselect(batch, 0, 0.0, 0.5)
        est = estimate_conditional(batch, sel, 1)
        means.append(est.mean)
        variances.append(est.variance)
        se_m.append(est.se_mean)
        se_v.append(est.se_variance)
    assert 0.5 < np.std(means) / np.mean(se_m) < 2.0
    assert 0.5 < np.std(variances) / np.mean(se_v) < 2.0


def test_estimate_flags_low_statistics():
    batch = sample_joint(vacuum(1), MeasurementPlan(angles=(0.0,), shots=3000, seed=8))
    sel = postselect(batch, 0, 1.5, 0.05)
    assert 2 <= sel.indices.size < 100
    est = estimate_conditional(batch, sel, 0)
    assert est.low_statistics
    assert est.n_selected == sel.indices.size


def test_estimate_validation():
    batch = sample_joint(vacuum(1), MeasurementPlan(angles=(0.0,), shots=1000, seed=5))
    empty = postselect(batch, 0, 50.0, 0.01)
    with pytest.raises(ValueError):
        estimate_conditional(batch, empty, 0)
    with pytest.raises(ValueError):
        estimate_conditional(batch, postselect(batch, 0, 0.0, 1.0), 2)


def test_survival_fraction_unbiased_across_seeds():
    n = 10_000
    state = epr_state(BENCH)
    p = success_probability(state, HomodyneProjection(0, 0.0, 0.0, half_width=0.1))
    sigma = math.sqrt(p * (1 - p) / n)
    zs = []
    for seed in range(100):
        batch = sample_joint(state, MeasurementPlan(angles=(0.0, 0.0), shots=n, seed=seed))
        zs.append((postselect(batch, 0, 0.0, 0.1).fraction - p) / sigma)
    zs = np.array(zs)
    # Mean of 100 z-scores is N(0, 0.1) under unbiasedness.
    assert abs(zs.mean()) < 0.3
    assert np.sum(np.abs(zs) > 3.0) <= 2


# --- tomography ------------------------------------------------------------------


def _angle_batches(state, angles, shots, seed0, select=None):
    out = []
    for k, theta in enumerate(angles):
        plan = MeasurementPlan(angles=(theta,) if state.n_modes == 1 else (0.0, theta),
                               shots=shots, seed=seed0 + k)
        batch = sample_joint(state, plan)
        if select is None:
            sel = postselect(batch, 0, 0.0, 1e9)
        else:
            sel = postselect(batch, 0, select[0], select[1])
        out.append((batch, sel))
    return out


def test_tomography_recovers_known_state():
    t = SqueezedTarget(r=0.45, a=0.3, b=-0.2, phi=0.6)
    state = target_state(t)
    angles = (0.0, math.pi / 3, 2 * math.pi / 3)
    fit = tomography_fit(_angle_batches(state, angles, 1_000_000, 900), 0)
    assert np.allclose(fit.mean, state.mean, atol=0.01)
    for i in range(2):
        assert fit.cov[i, i] == pytest.approx(state.cov[i, i], rel=0.01)
    assert fit.cov[0, 1] == pytest.approx(state.cov[0, 1], abs=0.01)


def test_tomography_symmetric_state_has_no_cross_term():
    state = target_state(SqueezedTarget(r=0.5))
    angles = (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4)
    fit = tomography_fit(_angle_batches(state, angles, 500_000, 50), 0)
    assert abs(fit.cov[0, 1]) < 0.01


def test_tomography_end_to_end_matches_analytic_conditional():
    state = epr_state(BENCH)
    proj = HomodyneProjection(0, 0.0, 1.0, half_width=0.1)
    ref = condition_windowed(state, proj).moments
    angles = (0.0, math.pi / 3, 2 * math.pi / 3)
    batches = _angle_batches(state, angles, 1_000_000, 7000, select=(1.0, 0.1))
    fit = tomography_fit(batches, 1)
    assert _hs_cosine(fit, ref) >= 0.999
    assert np.sqrt(np.linalg.det(fit.cov)) >= 0.5 - 1e-12


def test_tomography_validation():
    state = vacuum(1)
    two = _angle_batches(state, (0.0, math.pi / 2), 1000, 1)
    with pytest.raises(ValueError):
        tomography_fit(two, 0)
    degenerate = _angle_batches(state, (0.0, math.pi, 2 * math.pi), 1000, 1)
    with pytest.raises(ValueError):
        tomography_fit(degenerate, 0)
    good = _angle_batches(state, (0.0, math.pi / 3, 2 * math.pi / 3), 1000, 1)
    empty = postselect(good[0][0], 0, 50.0, 0.01)
    with pytest.raises(ValueError):
        tomography_fit([(good[0][0], empty), good[1], good[2]], 0)


def test_tomography_projects_onto_physical_cone():
    # Tiny survivor counts can produce covariances below the uncertainty
    # floor; the fit must return a physical state anyway.
    state = vacuum(1)
    angles = (0.0, math.pi / 3, 2 * math.pi / 3)
    rows = []
    for k, theta in enumerate(angles):
        batch = sample_joint(state, MeasurementPlan(angles=(theta,), shots=40, seed=400 + k))
        rows.append((batch, postselect(batch, 0, 0.0, 1e9)))
    fit = tomography_fit(rows, 0)
    assert math.sqrt(np.linalg.det(fit.cov)) >= 0.5 * (1 - 1e-9)


# --- export ----------------------------------------------------------------------


def test_export_batch_csv_roundtrip(tmp_path):
    batch = sample_joint(
        tmsv(0.4), MeasurementPlan(angles=(0.0, math.pi / 2), shots=12, seed=99)
    )
    path = tmp_path / "batch.csv"
    export_batch_csv(batch, str(path))
    lines = path.read_text().splitlines()
    meta = [ln for ln in lines if ln.startswith("#")]
    assert any(ln.startswith("# state=") for ln in meta)
    assert "# seed=99" in meta
    assert any(ln.startswith("# angles=") for ln in meta)
    assert "# shots=12" in meta
    header = [ln for ln in lines if not ln.startswith("#")][0]
    assert header == "shot,mode0,mode1"
    rows = [ln for ln in lines if not ln.startswith("#")][1:]
    assert len(rows) == 12
    first = rows[0].split(",")
    assert int(first[0]) == 0
    assert float(first[1]) == batch.outcomes[0, 0]
    assert float(first[2]) == batch.outcomes[0, 1]
