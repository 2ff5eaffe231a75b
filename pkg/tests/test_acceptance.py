"""End-to-end acceptance checks, one per promised behavior.

Every test pins a user-visible guarantee at its stated tolerance and, where a
derived number is involved, checks it through two independent routes (closed
form versus quadrature oracle, analytic window versus Monte Carlo).  Wall
clock budgets are asserted where a guarantee includes one.
"""

import math
import time

import numpy as np
import pytest

import oracles
from support import random_physical_state
from rsqueeze import (
    EprParams,
    HomodyneProjection,
    MeasurementPlan,
    SqueezedTarget,
    condition_exact,
    condition_sequence,
    condition_windowed,
    epr_state,
    estimate_conditional,
    estimate_squeezed_fit,
    fidelity_pure_target,
    ghz_like,
    marginal,
    postselect,
    predicted_displacement,
    rotate,
    sample_joint,
    squeezing_db,
    success_probability,
    target_state,
    tmsv,
)
from rsqueeze.cli import main, read_table

R_NOMINAL = 1.1513
R10 = math.log(10.0) / 2.0
BENCH = EprParams(v_s=0.24, v_a=1.3, eta_a=0.9, eta_b=0.9)


def test_acceptance_remote_phase_squeezing_basic():
    started = time.perf_counter()
    state = tmsv(R_NOMINAL)
    bob, _ = condition_exact(state, HomodyneProjection(0, math.pi / 2, 0.0))
    v_p = float(bob.cov[1, 1])
    assert v_p == pytest.approx(1.0 / (2.0 * math.cosh(2.0 * R_NOMINAL)), rel=1e-12)
    assert abs(squeezing_db(v_p) - (-7.1)) <= 0.1

    r_hat = math.log(math.cosh(2.0 * R_NOMINAL)) / 2.0
    target = SqueezedTarget(r=r_hat, phi=math.pi / 2)
    assert fidelity_pure_target(bob, target, method="closed") == pytest.approx(
        1.0, abs=1e-6
    )
    assert fidelity_pure_target(bob, target, method="quadrature") == pytest.approx(
        1.0, abs=1e-6
    )
    assert time.perf_counter() - started < 1.0


def test_acceptance_success_probability_dual_route():
    started = time.perf_counter()
    state = epr_state(BENCH)
    proj = HomodyneProjection(0, 0.0, 0.0, half_width=0.1)
    p_analytic = success_probability(state, proj)
    assert p_analytic == pytest.approx(0.092, abs=0.02)

    shots = 1_000_000
    batch = sample_joint(state, MeasurementPlan(angles=(0.0, 0.0), shots=shots, seed=42))
    fraction = postselect(batch, 0, 0.0, 0.1).fraction
    sigma = math.sqrt(p_analytic * (1.0 - p_analytic) / shots)
    assert abs(fraction - p_analytic) <= 3.0 * sigma
    assert fraction == pytest.approx(0.092, abs=0.02)
    assert time.perf_counter() - started < 10.0


def test_acceptance_conditional_displacement_curve():
    r_grid = np.linspace(0.0, 2.0, 20)
    for alpha in (0.25, 0.5, 0.75, 1.0):
        for r in r_grid:
            predicted = float(alpha) * math.tanh(2.0 * float(r))
            assert predicted_displacement(float(r), alpha) == pytest.approx(
                predicted, abs=1e-9
            )
            bob, _ = condition_exact(
                tmsv(float(r)), HomodyneProjection(0, 0.0, float(alpha))
            )
            assert float(bob.mean[0]) == pytest.approx(predicted, abs=1e-9)
            prepared_db = squeezing_db(float(bob.cov[0, 0]))
            if prepared_db <= -10.0:
                assert float(bob.mean[0]) / alpha >= 0.99


def test_acceptance_measurement_angle_rotates_prepared_state():
    state = tmsv(R_NOMINAL)
    bob_0, _ = condition_exact(state, HomodyneProjection(0, 0.0, 0.0))
    for theta in (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4):
        bob_theta, _ = condition_exact(state, HomodyneProjection(0, theta, 0.0))
        expected = rotate(bob_0, 0, theta)
        assert np.allclose(bob_theta.mean, expected.mean, atol=1e-9)
        assert np.allclose(bob_theta.cov, expected.cov, atol=1e-9)
        assert np.allclose(bob_theta.mean, 0.0, atol=1e-12)


def test_acceptance_three_party_fanout_and_collective_readout():
    started = time.perf_counter()
    state = ghz_like(3, R10)
    e2, e4 = math.exp(2.0 * R10), math.exp(4.0 * R10)

    # One x-readout prepares both partners at the closed-form moments.
    full, _ = condition_exact(state, HomodyneProjection(0, 0.0, 1.0))
    v_x = (1.0 + 2.0 * e4) / (2.0 * e2 * (2.0 + e4))
    v_p = (1.0 + 2.0 * e4) / (6.0 * e2)
    mean_x = (e4 - 1.0) / (e4 + 2.0)
    for k in range(2):
        block = marginal(full, [k])
        assert float(block.cov[0, 0]) == pytest.approx(v_x, abs=1e-6)
        assert float(block.cov[1, 1]) == pytest.approx(v_p, abs=1e-6)
        assert float(block.mean[0]) == pytest.approx(mean_x, abs=1e-6)
        assert float(block.mean[0]) == pytest.approx(0.970588, abs=1e-5)

    # Independent route: quadrature oracle on the two-party marginal.
    ab = marginal(state, [0, 1])
    m_ref, c_ref, _ = oracles.conditional_moments_grid(ab.mean, ab.cov, 0.0, 1.0)
    bob = marginal(full, [0])
    assert np.allclose(bob.mean, m_ref, atol=1e-6)
    assert np.allclose(bob.cov, c_ref, atol=1e-6)

    # Collective momentum readout steers the last station.
    claire, _ = condition_sequence(
        state,
        [HomodyneProjection(0, math.pi / 2, 0.0), HomodyneProjection(1, math.pi / 2, 0.0)],
    )
    v_pc = float(claire.cov[1, 1])
    assert v_pc == pytest.approx(3.0 * e2 / (2.0 * (2.0 + e4)), rel=1e-9)
    assert abs(squeezing_db(v_pc) - (-5.4)) <= 0.2
    var_x_ref, var_p_ref = oracles.ghz3_collective_p_moments_grid(R10)
    assert float(claire.cov[0, 0]) == pytest.approx(var_x_ref, abs=1e-6)
    assert v_pc == pytest.approx(var_p_ref, abs=1e-6)

    r_c = -0.5 * math.log(2.0 * v_pc)
    target = SqueezedTarget(r=r_c, phi=math.pi / 2)
    assert fidelity_pure_target(claire, target, method="closed") == pytest.approx(
        1.0, abs=1e-6
    )
    assert fidelity_pure_target(claire, target, method="quadrature") == pytest.approx(
        1.0, abs=1e-6
    )
    assert time.perf_counter() - started < 30.0


def test_acceptance_window_width_and_loss_trends():
    state = epr_state(BENCH)
    succ, variances, fidelities = [], [], []
    for delta in np.geomspace(0.01, 2.0, 10):
        wc = condition_windowed(
            state, HomodyneProjection(0, 0.0, 1.0, half_width=float(delta))
        )
        succ.append(wc.success_probability)
        variances.append(float(wc.moments.cov[0, 0]))
        fidelities.append(estimate_squeezed_fit(wc).fidelity)
    assert all(b > a for a, b in zip(succ, succ[1:]))
    assert all(b >= a - 1e-12 for a, b in zip(variances, variances[1:]))
    assert all(b <= a + 1e-9 for a, b in zip(fidelities, fidelities[1:]))

    # A lossless source survives arbitrary downstream loss with fidelity
    # above 0.999 and genuine squeezing at every point.
    r2 = math.log(10.0) / 10.0  # source at -2 dB
    for eta_b in np.linspace(0.05, 1.0, 12):
        src = epr_state(
            EprParams(
                v_s=0.5 * math.exp(-2.0 * r2),
                v_a=0.5 * math.exp(2.0 * r2),
                eta_a=1.0,
                eta_b=float(eta_b),
            )
        )
        out, _ = condition_exact(src, HomodyneProjection(0, 0.0, 1.0))
        fit = estimate_squeezed_fit(out)
        assert fit.fidelity >= 0.999
        assert float(np.linalg.eigvalsh(out.cov)[0]) < 0.5

    # A moderately squeezed pure source (-3.2 dB) stays above 0.99 on the
    # same sweep; its floor sits near eta_b = 0.5 where mixing is worst.
    r3 = 3.2 * math.log(10.0) / 20.0
    for eta_b in np.linspace(0.05, 1.0, 12):
        src = epr_state(
            EprParams(
                v_s=0.5 * math.exp(-2.0 * r3),
                v_a=0.5 * math.exp(2.0 * r3),
                eta_a=1.0,
                eta_b=float(eta_b),
            )
        )
        out, _ = condition_exact(src, HomodyneProjection(0, 0.0, 1.0))
        assert estimate_squeezed_fit(out).fidelity >= 0.99
        assert float(np.linalg.eigvalsh(out.cov)[0]) < 0.5


def test_acceptance_oracle_cross_validation():
    started = time.perf_counter()
    rng = np.random.default_rng(77001)
    for _ in range(100):
        state = random_physical_state(rng, 2)
        theta = float(rng.uniform(0.0, math.pi))
        alpha = float(rng.uniform(-2.0, 2.0))
        got, density = condition_exact(state, HomodyneProjection(0, theta, alpha))
        m_ref, c_ref, d_ref = oracles.conditional_moments_grid(
            state.mean, state.cov, theta, alpha
        )
        assert np.allclose(got.mean, m_ref, atol=1e-4)
        assert np.allclose(got.cov, c_ref, atol=1e-4)
        assert density == pytest.approx(d_ref, abs=1e-4)

    for _ in range(100):
        state = random_physical_state(rng, 1)
        target = SqueezedTarget(
            r=float(rng.uniform(0.0, 1.2)),
            a=float(rng.normal(0.0, 0.7)),
            b=float(rng.normal(0.0, 0.7)),
            phi=float(rng.uniform(0.0, math.pi)),
        )
        closed = fidelity_pure_target(state, target, method="closed")
        quad = fidelity_pure_target(state, target, method="quadrature")
        assert quad == pytest.approx(closed, abs=1e-6)
    assert time.perf_counter() - started < 120.0


def test_acceptance_monte_carlo_matches_analytic_conditional(tmp_path):
    state = epr_state(BENCH)
    proj = HomodyneProjection(0, 0.0, 1.0, half_width=0.1)
    wc = condition_windowed(state, proj)
    shots = 1_000_000
    batch = sample_joint(state, MeasurementPlan(angles=(0.0, 0.0), shots=shots, seed=2))
    sel = postselect(batch, 0, 1.0, 0.1)
    est = estimate_conditional(batch, sel, 1)
    assert abs(est.mean - float(wc.moments.mean[0])) <= 3.0 * est.se_mean
    assert abs(est.variance - float(wc.moments.cov[0, 0])) <= 3.0 * est.se_variance

    cfg = tmp_path / "scenario.toml"
    cfg.write_text(
        """
[source]
kind = "epr"
v_s = 0.24
v_a = 1.3
eta_a = 0.9
eta_b = 0.9

[[projection]]
mode = 0
theta = 0.0
alpha = 1.0
delta = 0.1

[montecarlo]
shots = 1000000
seed = 2
""",
        encoding="utf-8",
    )
    out1 = tmp_path / "one.csv"
    out2 = tmp_path / "two.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    table = read_table(out1)
    flags = {
        row[table.columns.index("quantity")]: row[table.columns.index("within_3se")]
        for row in table.rows
    }
    assert flags["survival_fraction"] is True
    assert flags["conditional_mean"] is True
    assert flags["conditional_variance"] is True


@pytest.mark.skip(
    reason="published measured values depend on device calibration data "
    "(detector efficiencies, dark noise, electronic gain) that the model "
    "does not include; the simulation reproduces the idealized scenario only"
)
def test_acceptance_measured_bench_values_not_modeled():
    raise AssertionError("intentionally unimplemented")
