import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from optoforce.closed_form import coefficients, noise_variance, signal
from optoforce.moment_oracle import (IntegrationError, DriftModel, MomentState, build_drift, initial_moments,
                                     integrate, integrate_path, is_physical, observable_stats,
                                     verify_against_closed_form)
from optoforce.params import DerivedParams, PhysicalParams

X1, Y1, XB, YB, X2, Y2 = range(6)


def to_sum_difference(d):
    """Linear map from (X1, Y1, Xb, Yb, X2, Y2) to the sum/difference coordinates."""
    T = np.zeros((6, 6))
    T[0, X1], T[0, X2] = 1, -1
    T[1, X1], T[1, X2] = d.theta, -d.chi
    T[2, XB] = 1
    T[3, YB] = 1
    T[4, Y1], T[4, Y2] = 1, 1
    T[5, Y1], T[5, Y2] = d.theta, d.chi
    return T


def test_drift_structure(toy):
    m = build_drift(toy, 1.0, 3.0)
    A = m.drift
    chi, th = toy.chi, toy.theta
    assert A[X1, XB] == chi and A[Y1, YB] == -chi
    assert A[X2, XB] == th and A[Y2, YB] == th
    assert np.count_nonzero(A[[X1, Y1, X2, Y2]]) == 4
    assert A[XB, XB] == A[YB, YB] == -2 * toy.gamma
    assert A[XB, X1] == chi and A[XB, X2] == -th and A[YB, Y1] == -chi and A[YB, Y2] == -th
    D = m.diffusion
    assert D[XB, XB] == D[YB, YB] == toy.gamma * 7.0
    assert np.count_nonzero(D) == 2
    assert np.all(np.linalg.eigvalsh(D) >= 0)


def test_drive_terms(toy):
    m = build_drift(toy, 2.0, 0.0)
    t = 0.37
    u = m.drive(t)
    assert u[XB] == pytest.approx(-toy.Omega * 2.0 * math.sin(toy.Omega * t))
    assert u[YB] == pytest.approx(toy.Omega * 2.0 * math.cos(toy.Omega * t))
    assert np.count_nonzero(u) == 2
    assert not np.any(build_drift(toy, 0.0, 0.0).drive(t))


def test_decoupled_limit(toy):
    d = dataclasses.replace(toy, chi=0.0, theta=0.0, theta_minus_chi=0.0)
    A = build_drift(d, 1.0, 0.0).drift
    expected = np.zeros((6, 6))
    expected[XB, XB] = expected[YB, YB] = -2 * toy.gamma
    assert np.array_equal(A, expected)


def test_undamped_eigenvalues(toy):
    d = toy.with_gamma(0.0)
    eig = np.linalg.eigvals(build_drift(d, 0.0, 0.0).drift)
    assert np.allclose(eig.real, 0, atol=1e-6)
    assert np.allclose(sorted(eig.imag), np.array([-1, -1, 0, 0, 1, 1]) * d.Theta, atol=1e-6)


def test_sum_difference_is_a_change_of_basis(toy):
    T = to_sum_difference(toy)
    q = build_drift(toy, 1.0, 2.0)
    sd = build_drift(toy, 1.0, 2.0, basis="sum_difference")
    assert np.allclose(sd.drift, T @ q.drift @ np.linalg.inv(T), atol=1e-12)
    assert np.allclose(sd.diffusion, T @ q.diffusion @ T.T)
    for s in (0.0, 0.8, 2.0):
        a = initial_moments(s, 2.0)
        b = initial_moments(s, 2.0, toy, basis="sum_difference")
        assert np.allclose(b.cov, T @ a.cov @ T.T, rtol=1e-12, atol=1e-12)


def test_vacuum_initial_state():
    st0 = initial_moments(0.0, 0.0)
    assert np.array_equal(st0.cov, np.eye(6) / 4)
    assert np.array_equal(st0.mean, np.zeros(6))
    assert observable_stats(st0) == (0.0, 0.5)


@given(st.floats(0, 4), st.floats(0, 100))
def test_squeezed_initial_state(s, nbar):
    st0 = initial_moments(s, nbar)
    assert st0.cov[Y1, Y1] == pytest.approx((1 + 2 * math.sinh(s) ** 2) / 4, rel=1e-12)
    assert st0.cov[X1, X2] == pytest.approx(math.sinh(2 * s) / 4)
    assert st0.cov[Y1, Y2] == pytest.approx(-math.sinh(2 * s) / 4)
    assert st0.cov[XB, XB] == pytest.approx((2 * nbar + 1) / 4)
    assert np.count_nonzero(st0.cov[XB, [X1, Y1, X2, Y2]]) == 0
    assert is_physical(st0)
    mean, var = observable_stats(st0)
    assert mean == 0
    assert var == pytest.approx(math.exp(-2 * s) / 2, rel=1e-9, abs=1e-12)


def test_unphysical_state_detected():
    bad = MomentState(t=0.0, mean=np.zeros(6), cov=np.eye(6) / 8)
    assert not is_physical(bad)


def test_identity_flow():
    z = np.zeros((6, 6))
    model = DriftModel(drift=z, drive_sin=np.zeros(6), drive_cos=np.zeros(6), drive_freq=0.0, diffusion=z)
    start = initial_moments(1.3, 2.0)
    start = dataclasses.replace(start, mean=np.arange(6.0))
    end = integrate(model, start, 17.0, 0.5)
    assert np.array_equal(end.mean, start.mean)
    assert np.array_equal(end.cov, start.cov)


def test_mirror_relaxes_to_thermal_level(toy):
    d = dataclasses.replace(toy, chi=0.0, theta=0.0, theta_minus_chi=0.0)
    nbar = 4.0
    model = build_drift(d, 0.0, nbar)
    start = initial_moments(0.0, 0.0)
    for t in (0.5, 2.0, 20.0):
        end = integrate(model, start, t, 1e-3)
        # Ornstein-Uhlenbeck: variance relaxes at rate 4 gamma toward (2 nbar + 1)/4
        expect = (2 * nbar + 1) / 4 + (0.25 - (2 * nbar + 1) / 4) * math.exp(-4 * d.gamma * t)
        assert end.cov[XB, XB] == pytest.approx(expect, rel=1e-10)
        assert end.cov[Y1, Y1] == 0.25


def test_fourth_order_convergence(toy):
    model = build_drift(toy, 1.0, 1.0)
    start = initial_moments(0.7, 1.0)
    t_end = 1.3
    ref = integrate(model, start, t_end, 1e-4)
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        out = integrate(model, start, t_end, dt)
        errs.append(max(np.max(np.abs(out.mean - ref.mean)), np.max(np.abs(out.cov - ref.cov))))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(3.7 < o < 4.3 for o in orders), orders


def test_step_too_large(toy):
    model = build_drift(toy, 1.0, 0.0)
    with pytest.raises(IntegrationError, match="fast scale under-resolved"):
        integrate(model, initial_moments(0.0, 0.0), 1.0, 2 * math.pi / toy.Omega / 10)


def test_divergence_reported():
    A = 100.0 * np.eye(6)
    model = DriftModel(drift=A, drive_sin=np.zeros(6), drive_cos=np.zeros(6), drive_freq=0.0,
                       diffusion=np.zeros((6, 6)))
    with pytest.raises(IntegrationError, match="integration diverged"):
        integrate(model, initial_moments(0.0, 0.0), 100.0, 1e-3)


def test_unforced_mean_stays_zero(toy):
    out = integrate(build_drift(toy, 0.0, 5.0), initial_moments(1.0, 5.0), 3.0, 1e-3)
    assert np.array_equal(out.mean, np.zeros(6))


def test_force_linearity(toy):
    start = initial_moments(0.5, 1.0)
    one = integrate(build_drift(toy, 1.0, 1.0), start, 2.0, 1e-3)
    two = integrate(build_drift(toy, 2.0, 1.0), start, 2.0, 1e-3)
    assert np.allclose(two.mean, 2 * one.mean, rtol=1e-12, atol=1e-14)
    assert np.array_equal(two.cov, one.cov)


def test_covariance_stays_physical(toy):
    model = build_drift(toy, 1.0, 2.0)
    states = integrate_path(model, initial_moments(1.5, 2.0), np.linspace(0.1, 6, 30), 1e-3)
    for st_ in states:
        assert np.array_equal(st_.cov, st_.cov.T)
        assert np.all(np.diag(st_.cov) >= 0)
        assert np.linalg.eigvalsh(st_.cov).min() >= 0
        assert is_physical(st_)


def test_purity_conserved_without_damping(toy):
    d = toy.with_gamma(0.0)
    model = build_drift(d, 0.0, 0.0)
    start = initial_moments(1.2, 3.0)
    det0 = np.linalg.det(4 * start.cov)
    period = 2 * math.pi / d.omega
    for st_ in integrate_path(model, start, np.linspace(0.1, 3, 10) * period, 1e-3):
        assert np.linalg.det(4 * st_.cov) == pytest.approx(det0, rel=1e-6)


@pytest.mark.parametrize("basis", ["quadrature", "sum_difference"])
def test_oracle_matches_closed_form_on_small_model(toy, basis):
    nbar = 3.0
    for s in (0.0, 1.0):
        model = build_drift(toy, 1.0, nbar, basis=basis)
        times = np.linspace(0.2, 3 * 2 * math.pi / toy.omega, 12)
        states = integrate_path(model, initial_moments(s, nbar, toy, basis=basis), times, 2e-4)
        for t, st_ in zip(times, states):
            mean, var = observable_stats(st_)
            assert abs(mean) == pytest.approx(float(signal(toy, t, 1.0)), rel=1e-8, abs=1e-10)
            assert var == pytest.approx(float(noise_variance(toy, t, s, nbar)), rel=1e-8)


def test_verification_undamped_vacuum_passes():
    p = PhysicalParams(damping_hz=0.0)
    d_omega = 209.58
    t_grid = np.linspace(0.1, 3.0, 4) * 2 * math.pi / d_omega
    report = verify_against_closed_form(p, t_grid, [0.0], [0.0])
    assert report.passed, report.max_error
    assert len(report.points) == 4


def test_verification_negative_control():
    def corrupted(d, t):
        c = coefficients(d, t)
        # A1 - A2 is carried separately, so it is corrupted consistently
        return dataclasses.replace(c, A2=-c.A2, A_diff=c.A1 + c.A2)

    p = PhysicalParams()
    t_grid = np.array([0.3, 1.1]) * 2 * math.pi / 209.58
    report = verify_against_closed_form(p, t_grid, [1.0], [0.0], closed=corrupted)
    assert not report.passed
    assert report.max_noise_error > 1e-2


def test_verification_rejects_empty_grids():
    with pytest.raises(ValueError):
        verify_against_closed_form(PhysicalParams(), [], [0.0], [0.0])
