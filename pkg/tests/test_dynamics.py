import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinarrival.dynamics import (
    STATUS_ARRIVED,
    STATUS_CENSORED,
    SolverConfig,
    StepBudgetExceeded,
    integrate_batch,
    integrate_trajectory,
    velocity,
)
from spinarrival.ensemble import sample_initial
from spinarrival.propagator import NodeProximityError, log_derivative
from spinarrival.state import Position3, SpinOrientation, WaveguideParams


def cylindrical_velocity(p, t, spin, omega):
    """Guidance law in (R, Phi, Z), converted to Cartesian by the chain rule."""
    r = math.hypot(p.x, p.y)
    phi = math.atan2(p.y, p.x)
    g = log_derivative(p.z, t)
    a, b = spin.alpha, spin.beta
    r_dot = math.sin(a) * math.sin(phi - b) * g.real
    phi_dot = math.sin(a) / r * math.cos(phi - b) * g.real + omega * math.cos(a)
    z_dot = g.imag + omega * math.sin(a) * math.sin(phi - b) * r
    return np.array(
        [
            r_dot * math.cos(phi) - r * math.sin(phi) * phi_dot,
            r_dot * math.sin(phi) + r * math.cos(phi) * phi_dot,
            z_dot,
        ]
    )


def rotate(p, angle):
    c, s = math.cos(angle), math.sin(angle)
    return Position3(c * p.x - s * p.y, s * p.x + c * p.y, p.z)


# -- velocity ---------------------------------------------------------------


def test_velocity_spin_up():
    p = Position3(0.03, -0.02, 0.4)
    omega = 50.0
    v = velocity(p, 0.7, SpinOrientation(0.0), WaveguideParams(10.0, omega))
    g = log_derivative(p.z, 0.7)
    assert np.allclose(v, [-omega * p.y, omega * p.x, g.imag], rtol=1e-14, atol=1e-14)


def test_velocity_on_x_axis():
    p = Position3(0.05, 0.0, 0.6)
    v = velocity(p, 1.3, SpinOrientation(math.pi / 2, 0.0), WaveguideParams(10.0, 100.0))
    assert v[0] == 0.0
    assert v[2] == pytest.approx(log_derivative(p.z, 1.3).imag, rel=1e-14)


def test_velocity_matches_cylindrical_oracle():
    p = Position3(0.1, 0.1, 0.5)
    spin = SpinOrientation(math.pi / 2, 0.0)
    v = velocity(p, 0.5, spin, WaveguideParams(10.0, 100.0))
    assert np.allclose(v, cylindrical_velocity(p, 0.5, spin, 100.0), rtol=0, atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(
    st.floats(0.0, math.pi),
    st.floats(0.0, 2 * math.pi, exclude_max=True),
    st.floats(0.01, 0.5),
    st.floats(0.0, 2 * math.pi),
    st.floats(0.05, 30.0),
    st.floats(0.05, 20.0),
    st.floats(0.1, 1e3),
)
def test_velocity_cylindrical_property(alpha, beta, r, phi, z, t, omega):
    p = Position3(r * math.cos(phi), r * math.sin(phi), z)
    spin = SpinOrientation(alpha, beta)
    v = velocity(p, t, spin, WaveguideParams(40.0, omega))
    ref = cylindrical_velocity(p, t, spin, omega)
    assert np.allclose(v, ref, rtol=1e-10, atol=1e-10 * max(1.0, omega * r))


def test_velocity_preconditions():
    spin, params = SpinOrientation(0.3), WaveguideParams(10.0, 10.0)
    with pytest.raises(ValueError):
        velocity(Position3(0, 0, 0.5), 0.0, spin, params)
    with pytest.raises(ValueError):
        velocity(Position3(0, 0, -0.1), 1.0, spin, params)
    with pytest.raises(NodeProximityError):
        velocity(Position3(0, 0, 1e-15), 5.0, spin, params)


# -- integration ------------------------------------------------------------

SPIN_UP = SpinOrientation(0.0)
UP_DOWN = SpinOrientation(math.pi / 2)


def test_spin_up_arrives():
    rec = integrate_trajectory(Position3(0.0, 0.0, 0.99), SPIN_UP, WaveguideParams(100.0, 1e3))
    assert rec.tau is not None and rec.tau > 0
    assert not rec.censored
    assert rec.crossing_count_hint == 1


def test_rejects_initial_outside_trap():
    with pytest.raises(ValueError):
        integrate_trajectory(Position3(0, 0, 1.2), SPIN_UP, WaveguideParams(10.0, 10.0))
    with pytest.raises(ValueError):
        integrate_batch(np.array([[0.0, 0.0, 0.0]]), SPIN_UP, WaveguideParams(10.0, 10.0))


def test_deterministic():
    p = Position3(0.02, -0.01, 0.37)
    params = WaveguideParams(20.0, 100.0)
    a = integrate_trajectory(p, UP_DOWN, params)
    b = integrate_trajectory(p, UP_DOWN, params)
    assert a.tau == b.tau and a.steps == b.steps


def test_batch_matches_single():
    params = WaveguideParams(10.0, 50.0)
    p0 = sample_initial(6, params, seed=11)
    status, tau, _, _ = integrate_batch(p0, UP_DOWN, params)
    for i in range(6):
        rec = integrate_trajectory(Position3(*p0[i]), UP_DOWN, params)
        assert status[i] == STATUS_ARRIVED
        assert tau[i] == rec.tau


def test_censoring():
    params = WaveguideParams(10.0, 10.0)
    cfg = SolverConfig(t_max=2.0)
    rec = integrate_trajectory(Position3(0.0, 0.0, 0.5), SPIN_UP, params, cfg)
    assert rec.censored and rec.tau is None
    assert rec.final[0] == pytest.approx(2.0)
    status, tau, _, _ = integrate_batch(np.array([[0.0, 0.0, 0.5]]), SPIN_UP, params, cfg)
    assert status[0] == STATUS_CENSORED and np.isnan(tau[0])


def test_horizon_must_cover_lobes():
    with pytest.raises(ValueError):
        SolverConfig(t_max=1.0).horizon(100.0)
    assert SolverConfig().horizon(10.0) == 500.0


def test_step_budget_is_an_error():
    with pytest.raises(StepBudgetExceeded):
        integrate_trajectory(Position3(0, 0, 0.5), UP_DOWN, WaveguideParams(50.0, 1e3), SolverConfig(max_steps=20))


def test_first_crossing_on_dense_grid():
    params = WaveguideParams(30.0, 100.0)
    p0 = sample_initial(20, params, seed=5)
    for row in p0:
        rec, path = integrate_trajectory(Position3(*row), UP_DOWN, params, path_capacity=200_000)
        before = path[:, 0] < rec.tau
        assert np.all(path[before, 3] < params.L)
        assert abs(rec.final[3] - params.L) <= 1e-7
        assert rec.final[0] == rec.tau


def test_spin_up_single_outward_crossing():
    params = WaveguideParams(100.0, 1e3)
    cfg = SolverConfig(track_crossings=True, t_max=300.0)
    p0 = sample_initial(1000, params, seed=2)
    status, tau, crossings, _ = integrate_batch(p0, SPIN_UP, params, cfg)
    arrived = status == STATUS_ARRIVED
    assert np.all(crossings[arrived] == 1)
    for row in p0[:100]:
        rec = integrate_trajectory(Position3(*row), SPIN_UP, params)
        assert rec.final[4] > 0.0


def test_up_down_crosses_more_than_once():
    params = WaveguideParams(20.0, 100.0)
    cfg = SolverConfig(track_crossings=True, t_max=60.0)
    p0 = sample_initial(200, params, seed=9)
    _, _, crossings, _ = integrate_batch(p0, UP_DOWN, params, cfg)
    assert crossings.max() > 1


def test_spin_up_keeps_radius():
    params = WaveguideParams(20.0, 300.0)
    p = Position3(0.04, 0.03, 0.6)
    rec, path = integrate_trajectory(p, SPIN_UP, params, path_capacity=100_000)
    r = np.hypot(path[:, 1], path[:, 2])
    assert np.max(np.abs(r / 0.05 - 1.0)) <= 1e-6
    # the transverse motion is a rotation at rate omega
    ang = params.omega * (path[:, 0] - path[0, 0])
    assert np.allclose(path[:, 1], p.x * np.cos(ang) - p.y * np.sin(ang), atol=1e-9)
    assert np.allclose(path[:, 2], p.x * np.sin(ang) + p.y * np.cos(ang), atol=1e-9)


PRECISE = SolverConfig(ramp_time=1.0)


def test_tolerance_convergence():
    params = WaveguideParams(10.0, 100.0)
    p0 = sample_initial(100, params, seed=4)
    _, t1, _, _ = integrate_batch(p0, SPIN_UP, params, SolverConfig(rel_tol=1e-8, ramp_time=1.0))
    _, t2, _, _ = integrate_batch(p0, SPIN_UP, params, SolverConfig(rel_tol=1e-9, ramp_time=1.0))
    assert np.max(np.abs(t1 - t2) / t2) < 1e-6


def test_default_mode_accuracy():
    # without the early-time ramp the diffraction oscillations are stepped
    # over; arrival times are still good to ~1e-4, ample for ensemble statistics
    params = WaveguideParams(10.0, 100.0)
    p0 = sample_initial(100, params, seed=4)
    _, t1, _, s1 = integrate_batch(p0, SPIN_UP, params, SolverConfig())
    _, t2, _, s2 = integrate_batch(p0, SPIN_UP, params, PRECISE)
    assert np.max(np.abs(t1 - t2) / t2) < 2e-4
    assert s1.sum() < s2.sum() / 5


def test_rotational_equivariance():
    params = WaveguideParams(10.0, 10.0)
    alpha, beta = math.pi / 4, math.pi / 3
    for row in sample_initial(20, params, seed=8):
        p = Position3(*row)
        ref = integrate_trajectory(p, SpinOrientation(alpha, 0.0), params, PRECISE)
        rot = integrate_trajectory(rotate(p, beta), SpinOrientation(alpha, beta), params, PRECISE)
        assert abs(rot.tau - ref.tau) <= 1e-6
        back = rotate(Position3(*rot.final[1:4]), -beta)
        assert np.allclose([back.x, back.y, back.z], ref.final[1:4], atol=1e-6)


def test_mirror_equivalence():
    params = WaveguideParams(10.0, 10.0)
    alpha = math.pi / 4
    for row in sample_initial(20, params, seed=12):
        p = Position3(*row)
        a = integrate_trajectory(p, SpinOrientation(alpha), params, PRECISE)
        b = integrate_trajectory(Position3(-p.x, p.y, p.z), SpinOrientation(math.pi - alpha), params, PRECISE)
        assert abs(a.tau - b.tau) <= 1e-6
        assert b.final[1] == pytest.approx(-a.final[1], abs=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(rel_tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_steps=0)
    with pytest.raises(ValueError):
        SolverConfig(ramp_time=-1.0)
    cfg = dataclasses.replace(SolverConfig(), t_max=12.0)
    assert cfg.horizon(10.0) == 12.0
