import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from phasewalk import (ComSurface, ControlInput, PhaseState, RobotParams, Trajectory,
                       analytic_flow, integrate, omega_from_surface, pipm_derivative)
from phasewalk.dynamics import StopAfter, StopAtX, check_omega
from phasewalk.errors import InconsistentOmega, MaxSamplesExceeded, NonPositiveApexHeight

from conftest import W1
from oracles import rk4_scalar

FLAT = ComSurface(0.0, 0.0, 1.0)
P = RobotParams()


def test_omega_flat_unit_height():
    assert omega_from_surface(FLAT, (0, 0, 0), P) == pytest.approx(3.132, abs=5e-3)


def test_omega_tilted_surface():
    # sqrt(9.81 / 1.1)
    w = omega_from_surface(ComSurface(0.1, 0.0, 1.0), (1.0, 0.0, 0.0), P)
    assert w == pytest.approx(2.986332502951039, rel=1e-14)


def test_omega_rejects_zero_height():
    with pytest.raises(NonPositiveApexHeight):
        omega_from_surface(ComSurface(0.0, 0.0, 0.0), (0, 0, 0), P)


def test_phase_state_rejects_nan():
    with pytest.raises(ValueError):
        PhaseState(0, 0, math.nan, 0, 0, 0)


def test_equilibrium_at_contact():
    s = PhaseState(0.3, -0.1, 1.0, 0, 0, 0)
    u = ControlInput(W1, foot=(0.3, -0.1, 0.0))
    d = pipm_derivative(s, u, FLAT, P)
    assert np.all(d == 0)


def test_offset_acceleration():
    s = PhaseState(0.1, 0, 1.0, 0, 0, 0)
    d = pipm_derivative(s, ControlInput(W1), FLAT, P)
    assert d[3] == pytest.approx(0.981, rel=1e-12)


def test_torque_cancels_pendulum():
    s = PhaseState(0.1, 0, 1.0, 0, 0, 0)
    d = pipm_derivative(s, ControlInput(W1, tau_y=P.weight * 0.1), FLAT, P)
    assert abs(d[3]) < 1e-15


def test_lateral_torque_sign():
    # lateral channel: ydd = w^2 (y - y_foot) - w^2 tau_x / (m g)
    s = PhaseState(0, 0.0, 1.0, 0, 0, 0)
    d = pipm_derivative(s, ControlInput(W1, tau_x=1.0), FLAT, P)
    assert d[4] == pytest.approx(-W1 ** 2 / P.weight)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-2, 2), st.floats(-2, 2),
       st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-3, 3), st.floats(-3, 3),
       st.floats(-3, 3))
def test_vertical_acceleration_on_plane(x, y, xd, yd, a, b, tx, ty, tz):
    surf = ComSurface(a, b, 1.2)
    w = omega_from_surface(surf, (0, 0, 0), P)
    s = surf.project(x, y, xd, yd)
    d = pipm_derivative(s, ControlInput(w, tx, ty, tz), surf, P)
    assert d[5] == a * d[3] + b * d[4]


def test_inconsistent_omega_rejected():
    with pytest.raises(InconsistentOmega):
        check_omega(ControlInput(3.0), FLAT, P)
    # recovery mode treats omega as a free input
    pipm_derivative(PhaseState(0, 0, 1, 0, 0, 0), ControlInput(3.0), FLAT, P, recovery=True)


def test_analytic_identity_at_zero():
    assert analytic_flow(0.3, 0.7, 0.1, 2.5, 0.0) == (0.3, 0.7)


@given(st.floats(0.05, 2.0), st.floats(-0.5, 0.5))
def test_analytic_asymptote_invariance(xd0, t):
    w, f = 3.132, 0.2
    x, xd = analytic_flow(f + xd0 / w, xd0, f, w, t)
    assert xd == pytest.approx(w * (x - f), rel=1e-12, abs=1e-12)


def test_analytic_vs_rk4_oracle():
    x, xd = analytic_flow(1.0, 0.6, 1.0, 3.132, 0.1)
    xr, vr = rk4_scalar(1.0, 0.6, 1.0, 3.132, 1e-5, 10000)
    assert abs(x - xr) < 1e-8 and abs(xd - vr) < 1e-8


def test_integrate_immediate_stop():
    s = PhaseState(0.5, 0, 1, 0.6, 0, 0)
    tr = integrate(s, ControlInput(W1), FLAT, P, 1e-3, StopAtX(0.0))
    assert len(tr) == 1 and tr.first == s


def test_integrate_matches_analytic():
    s = PhaseState(-0.25, 0, 1, 0.98, 0, 0)
    tr = integrate(s, ControlInput(W1), FLAT, P, 1e-4, StopAfter(0.5))
    x, xd = analytic_flow(-0.25, 0.98, 0.0, W1, tr.t)
    assert np.max(np.abs(tr.states[:, 0] - x)) < 1e-6
    assert np.max(np.abs(tr.states[:, 3] - xd)) < 1e-6


def test_lateral_equilibrium_stays_put():
    s = PhaseState(-0.2, 0.15, 1, 0.9, 0, 0)
    tr = integrate(s, ControlInput(W1, foot=(0, 0.15, 0)), FLAT, P, 1e-3, StopAfter(0.4))
    assert np.all(tr.states[:, 1] == 0.15)


def test_time_reversibility():
    s = PhaseState(-0.2, 0.05, 1, 0.9, -0.1, 0)
    u = ControlInput(W1)
    fwd = integrate(s, u, FLAT, P, 1e-3, StopAfter(1e-3))
    back = integrate(fwd.last, u, FLAT, P, -1e-3, StopAfter(1e-3))
    assert np.max(np.abs(back.first.as_array() - s.as_array())) < 1e-9


def test_backward_integration_time_order():
    s = PhaseState(0, 0, 1, 0.6, 0, 0)
    tr = integrate(s, ControlInput(W1), FLAT, P, -1e-3, StopAfter(0.1))
    assert np.all(np.diff(tr.t) > 0) and tr.last == s


def test_max_samples():
    s = PhaseState(0, 0, 1, 0.6, 0, 0)
    with pytest.raises(MaxSamplesExceeded):
        integrate(s, ControlInput(W1), FLAT, P, 1e-3, StopAtX(100.0), max_samples=50)


def test_euler_is_first_order():
    s = PhaseState(-0.25, 0, 1, 0.98, 0, 0)
    errs = []
    for dt in (1e-3, 5e-4):
        tr = integrate(s, ControlInput(W1), FLAT, P, dt, StopAfter(0.5), method="euler")
        x, _ = analytic_flow(-0.25, 0.98, 0.0, W1, tr.t[-1])
        errs.append(abs(tr.states[-1, 0] - x))
    assert 1.7 < errs[0] / errs[1] < 2.3


def test_trajectory_requires_increasing_time():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 6)))
