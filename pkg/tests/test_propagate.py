import math

import numpy as np
import pytest

from conftest import random_system, unit_rig
from sloshdyn.dynamics import SingularityError
from sloshdyn.propagate import (
    InputProfile,
    PropagationError,
    Scenario,
    SimSettings,
    eval_inputs,
    propagate,
    relative_drift,
    rk4_step,
)
from sloshdyn.system import SystemState


def test_rk4_global_error_is_fourth_order():
    def f(y, t):
        return np.array([y[1], -y[0]])

    errors = []
    for steps in (20, 40, 80):
        dt = 2.0 / steps
        y = np.array([1.0, 0.0])
        for k in range(steps):
            y = rk4_step(f, y, k * dt, dt)
        errors.append(abs(y[0] - math.cos(2.0)))
    assert errors[0] / errors[1] == pytest.approx(16.0, rel=0.05)
    assert errors[1] / errors[2] == pytest.approx(16.0, rel=0.05)


def test_rk4_step_is_exact_for_quartic():
    y = rk4_step(lambda y, t: np.array([4 * t**3]), np.array([0.0]), 0.0, 1.5)
    assert y[0] == pytest.approx(1.5**4, rel=1e-15)


def test_rk4_step_on_state_keeps_unit_quaternion():
    from sloshdyn.dynamics import state_derivative
    from sloshdyn.system import ExternalInputs

    system = unit_rig()
    s = SystemState.create(1, omega=(3.0, -2.0, 5.0), angles=[(0.2, 0.1)])
    out = rk4_step(lambda st, t: state_derivative(st, system, ExternalInputs()), s, 0.0, 0.05)
    assert np.linalg.norm(out.attitude) == pytest.approx(1.0, abs=1e-15)


def test_constant_body_thrust_is_integrated_exactly():
    system = unit_rig()
    profile = InputProfile(force=[[0.0, 0.0, 0.0, 10.0]], force_frame="body")
    traj = propagate(Scenario(system, SystemState.rest(1), inputs=profile, settings=SimSettings(0.0, 1.0, 0.01)))
    final = traj.final
    np.testing.assert_allclose(final.position, [0.0, 0.0, 0.5], atol=1e-13)
    np.testing.assert_allclose(final.velocity, [0.0, 0.0, 1.0], atol=1e-13)
    np.testing.assert_allclose(traj.tensions[:, 0], 1.0, atol=1e-13)


def test_free_fall_propagation():
    traj = propagate(
        Scenario(unit_rig(), SystemState.rest(1), gravity=np.array([0, 0, -9.81]), settings=SimSettings(0, 1, 0.01))
    )
    assert traj.final.position[2] == pytest.approx(-4.905, abs=1e-12)
    np.testing.assert_allclose(traj.states[:, 13:], 0.0, atol=1e-14)


def test_rest_without_inputs_stays_put():
    traj = propagate(Scenario(unit_rig(), SystemState.rest(1), settings=SimSettings(0, 0.5, 0.01)))
    assert np.ptp(traj.states, axis=0).max() == 0.0


def test_short_run_conserves_invariants():
    rng = np.random.default_rng(2)
    system = random_system(rng, 3)
    initial = SystemState.create(
        3, velocity=(0.1, -0.2, 0.3), omega=(0.2, -0.1, 0.3),
        angles=rng.uniform(-0.3, 0.3, (3, 2)), rates=rng.uniform(-0.5, 0.5, (3, 2)),
    )
    traj = propagate(Scenario(system, initial, settings=SimSettings(0, 1, 1e-3)))
    assert relative_drift(traj.energy) < 1e-9
    assert relative_drift(traj.momentum) < 1e-12
    assert relative_drift(traj.angular_momentum) < 1e-9


def test_trajectory_shapes_and_grid():
    traj = propagate(Scenario(unit_rig(), SystemState.rest(1), settings=SimSettings(0.5, 1.0, 0.1)))
    np.testing.assert_allclose(traj.t, [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    assert traj.states.shape == (6, 17)
    assert traj.accelerations.shape == (6, 8)
    assert traj.wrench_forces.shape == (6, 1, 3)


def test_linear_and_zoh_interpolation():
    samples = [[0.0, 0.0, 0.0, 0.0], [1.0, 2.0, -2.0, 4.0]]
    lin = eval_inputs(InputProfile(force=samples), 0.25)
    zoh = eval_inputs(InputProfile(force=samples, interpolation="zoh"), 0.75)
    np.testing.assert_allclose(lin.force, [0.5, -0.5, 1.0])
    np.testing.assert_allclose(zoh.force, [0.0, 0.0, 0.0])
    clamped = eval_inputs(InputProfile(torque=samples), 5.0)
    np.testing.assert_allclose(clamped.torque, [2.0, -2.0, 4.0])
    np.testing.assert_allclose(eval_inputs(InputProfile(), 3.0).force, 0.0)


@pytest.mark.parametrize(
    "kwargs, match",
    [
        ({"force": [[1.0, 0, 0, 0], [1.0, 0, 0, 0]]}, "strictly increasing"),
        ({"force": [[0.0, 0, 0]]}, r"\[t, x, y, z\]"),
        ({"torque": [[0.0, np.nan, 0, 0]]}, "non-finite"),
        ({"interpolation": "cubic"}, "interpolation"),
    ],
)
def test_input_profile_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        InputProfile(**kwargs)


@pytest.mark.parametrize("t0, tf, dt", [(0.0, 1.0, 0.3), (0.0, 1.0, 0.0), (1.0, 1.0, 0.1)])
def test_sim_settings_validation(t0, tf, dt):
    with pytest.raises(ValueError):
        SimSettings(t0, tf, dt)


def test_singularity_during_propagation_reports_time():
    system = unit_rig()
    start = SystemState.create(1, angles=[(math.pi / 2 - 0.05, 0.0)], rates=[(2.0, 0.0)])
    with pytest.raises(SingularityError) as info:
        propagate(Scenario(system, start, settings=SimSettings(0, 1, 1e-3)))
    assert info.value.index == 0
    assert 0.0 < info.value.time < 0.05


def test_non_finite_state_raises():
    system = unit_rig()
    start = SystemState.create(1, omega=(1e200, 0, 0))
    with pytest.raises(PropagationError, match="non-finite"):
        with np.errstate(all="ignore"):
            propagate(Scenario(system, start, settings=SimSettings(0, 0.1, 0.01)))


def test_relative_drift():
    assert relative_drift(np.array([2.0, 2.5, 1.0])) == pytest.approx(0.5)
    assert relative_drift(np.array([[3.0, 4.0], [3.0, 4.5]])) == pytest.approx(0.1)
    assert relative_drift(np.zeros(3)) == 0.0


def test_quaternion_norm_and_com_under_constant_inertial_force():
    from sloshdyn.dynamics import mass_kinematics

    rng = np.random.default_rng(4)
    system = random_system(rng, 3)
    F = np.array([3.0, -1.0, 20.0])
    initial = SystemState.create(
        3, velocity=(0.2, 0.0, -0.1), omega=(0.3, -0.2, 0.1),
        angles=rng.uniform(-0.3, 0.3, (3, 2)), rates=rng.uniform(-0.5, 0.5, (3, 2)),
    )
    profile = InputProfile(force=[[0.0, *F]])
    traj = propagate(Scenario(system, initial, inputs=profile, settings=SimSettings(0, 1, 1e-3)))
    assert np.abs(np.linalg.norm(traj.states[:, 6:10], axis=1) - 1.0).max() < 1e-12

    m = system.arrays.mass
    M = system.total_mass

    def com(k):
        s = traj.state(k)
        pos, vel = mass_kinematics(s, system)
        return (system.body.mass * s.position + m @ pos) / M, (system.body.mass * s.velocity + m @ vel) / M

    c0, v0 = com(0)
    for k in (250, 500, 1000):
        t = traj.t[k]
        np.testing.assert_allclose(com(k)[0], c0 + v0 * t + 0.5 * F / M * t * t, atol=1e-11)
