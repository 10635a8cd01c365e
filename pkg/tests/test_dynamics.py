import math

import numpy as np
import pytest

from rotorsim.dynamics import (
    GRAVITY,
    MultirotorParams,
    RigidBodyState,
    RotorCommand,
    Wrench,
    allocation_matrix,
    linear_acceleration,
    rotor_thrust,
    state_derivative,
    step,
    step_wrench,
    wrench_from_command,
    wrench_from_forces,
)
from rotorsim.frames import quat_from_axis_angle, quat_yaw


@pytest.fixture
def params():
    return MultirotorParams()


def hover_wrench(p):
    return Wrench(p.mass * p.g, [0.0, 0.0, 0.0])


def test_rotor_thrust_law():
    assert rotor_thrust(0.0, 1e-5) == 0.0
    assert rotor_thrust(1000.0, 1e-5) == pytest.approx(10.0, rel=1e-15)
    assert rotor_thrust(600.0, 8.55e-6) * 4 == pytest.approx(rotor_thrust(1200.0, 8.55e-6), rel=1e-15)
    with pytest.raises(ValueError):
        rotor_thrust(-1.0, 1e-5)


def test_params_validation():
    with pytest.raises(ValueError):
        MultirotorParams(mass=0.0)
    with pytest.raises(ValueError):
        MultirotorParams(inertia=[0.1, 0.0, 0.1])
    with pytest.raises(ValueError):
        MultirotorParams(spin_signs=[1, 1, -1, -1])
    with pytest.raises(ValueError):
        MultirotorParams(rotor_positions=[[1, 0, 0], [0, 1, 0], [-1, 0, 0]], spin_signs=[1, -1, 1])
    with pytest.raises(ValueError):
        MultirotorParams(c_thrust=0.0)
    hexa = MultirotorParams(
        rotor_positions=[[math.cos(a), math.sin(a), 0.0] for a in np.arange(6) * math.pi / 3],
        spin_signs=[1, -1, 1, -1, 1, -1],
    )
    assert hexa.n_rotors == 6


def test_equal_forces_give_zero_torque(params):
    w = wrench_from_forces([3.3, 3.3, 3.3, 3.3], params)
    assert w.thrust == pytest.approx(13.2)
    # exactly zero, not merely small
    assert np.all(w.torque == 0.0)


def test_yaw_torque_first_rotor_only(params):
    w = wrench_from_forces([1.0, 0.0, 0.0, 0.0], params)
    assert w.torque[2] == pytest.approx(0.06, abs=1e-15)


def test_pitch_torque_sign_on_plus_layout():
    # '+' quad: front rotor on +x; extra thrust there pitches nose up (negative torque about y, FLU)
    L, f0, d = 0.3, 2.0, 0.5
    p = MultirotorParams(rotor_positions=[[L, 0, 0], [0, L, 0], [-L, 0, 0], [0, -L, 0]])
    w = wrench_from_forces([f0 + d, f0, f0, f0], p)
    # oracle: sum of r_i x (F_i e3)
    expected = sum(np.cross(r, [0, 0, f]) for r, f in zip(p.rotor_positions, [f0 + d, f0, f0, f0]))
    np.testing.assert_allclose(w.torque[:2], expected[:2], atol=1e-15)
    assert w.torque[1] == pytest.approx(-L * d)
    assert w.torque[0] == pytest.approx(0.0, abs=1e-15)


def test_allocation_matrix_matches_wrench(params, rng):
    A = allocation_matrix(params)
    for _ in range(50):
        f = rng.uniform(0, 10, 4)
        w = wrench_from_forces(f, params)
        np.testing.assert_allclose(A @ f, np.concatenate([[w.thrust], w.torque]), atol=1e-13)


def test_force_count_mismatch(params):
    with pytest.raises(ValueError):
        wrench_from_forces([1.0, 1.0, 1.0], params)
    with pytest.raises(ValueError):
        wrench_from_command(RotorCommand([100.0] * 6), params)


def test_rotor_command_validation():
    with pytest.raises(ValueError):
        RotorCommand([1.0, -1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        RotorCommand([1.0, math.nan, 1.0, 1.0])


def test_command_above_limit_is_capped(params):
    over = wrench_from_command(RotorCommand([5000.0] * 4), params)
    at = wrench_from_command(RotorCommand([params.max_rotor_speed] * 4), params)
    assert over.thrust == at.thrust


def test_hover_equilibrium_derivative(params):
    d = state_derivative(RigidBodyState(), hover_wrench(params), params)
    for part in (d.p_dot, d.v_dot, d.q_dot, d.omega_dot):
        np.testing.assert_allclose(part, 0.0, atol=1e-15)


def test_free_fall_derivative(params):
    d = state_derivative(RigidBodyState(), Wrench(0.0, [0, 0, 0]), params)
    np.testing.assert_allclose(d.v_dot, [0.0, 0.0, -9.81], atol=1e-15)


def test_drag_term_identity_attitude():
    p = MultirotorParams(drag=[0.5, 0.1, 0.0])
    d = state_derivative(RigidBodyState(v=[1.0, 0.0, 0.0]), hover_wrench(p), p)
    np.testing.assert_allclose(d.v_dot, [-0.5, 0.0, 0.0], atol=1e-15)


def test_drag_acts_in_body_axes():
    # yawed 90 deg: world x motion is body -y motion, so dy applies
    p = MultirotorParams(drag=[0.5, 0.1, 0.0])
    q = quat_from_axis_angle([0, 0, 1], math.pi / 2)
    d = state_derivative(RigidBodyState(v=[1.0, 0.0, 0.0], q=q), hover_wrench(p), p)
    np.testing.assert_allclose(d.v_dot, [-0.1, 0.0, 0.0], atol=1e-15)


def test_vectorised_and_scalar_acceleration_agree(params, rng):
    for _ in range(50):
        q = quat_from_axis_angle(rng.standard_normal(3), rng.uniform(-3, 3))
        s = RigidBodyState(v=rng.standard_normal(3), q=q, omega=rng.standard_normal(3))
        w = Wrench(rng.uniform(0, 30), rng.standard_normal(3))
        np.testing.assert_allclose(linear_acceleration(s, w, params), state_derivative(s, w, params).v_dot,
                                   atol=1e-13)


def test_euler_equation_gyroscopic_term(params):
    s = RigidBodyState(omega=[1.0, 2.0, 0.0])
    d = state_derivative(s, Wrench(0.0, [0, 0, 0]), params)
    J = params.inertia
    expected = -np.cross(s.omega, J * s.omega) / J
    np.testing.assert_allclose(d.omega_dot, expected, atol=1e-15)


def test_free_fall_one_second(params):
    s = RigidBodyState(p=[0.0, 0.0, 10.0])
    for _ in range(250):
        s = step(s, RotorCommand([0.0] * 4), 0.004, params)
    assert s.p[2] - 10.0 == pytest.approx(-4.905, abs=1e-6)
    assert s.t == pytest.approx(1.0, abs=1e-12)


def test_hover_holds_position(params):
    s = RigidBodyState(p=[1.0, -2.0, 3.0])
    w = hover_wrench(params)
    for _ in range(1000):
        s = step_wrench(s, w, 0.004, params)
    np.testing.assert_allclose(s.p, [1.0, -2.0, 3.0], atol=1e-9)


def test_hover_from_rotor_speeds(params):
    speed = math.sqrt(params.mass * params.g / (4 * params.c_thrust))
    s = RigidBodyState()
    for _ in range(250):
        s = step(s, RotorCommand([speed] * 4), 0.004, params)
    np.testing.assert_allclose(s.p, 0.0, atol=1e-9)


def test_constant_yaw_rate(params):
    s = RigidBodyState(omega=[0.0, 0.0, 1.0])
    w = hover_wrench(params)
    for _ in range(250):
        s = step_wrench(s, w, 0.004, params)
        assert abs(np.linalg.norm(s.q) - 1.0) < 1e-9
    assert abs(quat_yaw(s.q) - 1.0) < 1e-6


def test_spherical_body_conserves_angular_momentum():
    p = MultirotorParams(inertia=[0.04, 0.04, 0.04])
    s = RigidBodyState(omega=[0.3, -1.2, 2.0])
    h0 = p.inertia * s.omega
    for _ in range(500):
        s = step_wrench(s, Wrench(p.mass * p.g, [0, 0, 0]), 0.004, p)
    np.testing.assert_allclose(p.inertia * s.omega, h0, atol=1e-12)


def test_tumbling_body_energy_conserved(params):
    # asymmetric torque-free body: kinetic energy is an invariant of Euler's equations
    s = RigidBodyState(omega=[0.5, 1.5, -0.7])
    e0 = 0.5 * np.sum(params.inertia * s.omega**2)
    for _ in range(2500):
        s = step_wrench(s, Wrench(0.0, [0, 0, 0]), 0.004, params)
    assert 0.5 * np.sum(params.inertia * s.omega**2) == pytest.approx(e0, rel=1e-8)


def test_dt_bounds(params):
    s = RigidBodyState()
    for dt in (0.0, -0.001, 0.021, math.nan):
        with pytest.raises(ValueError):
            step(s, RotorCommand([0.0] * 4), dt, params)
    step(s, RotorCommand([0.0] * 4), 0.02, params)


def test_state_validation():
    with pytest.raises(ValueError):
        RigidBodyState(q=[0.0, 0.0, 0.0, 2.0])
    with pytest.raises(ValueError):
        RigidBodyState(p=[0.0, math.inf, 0.0])
    with pytest.raises(ValueError):
        Wrench(-1.0, [0, 0, 0])


def test_rk4_converges_at_fourth_order(params):
    # tilted vehicle under constant thrust and torque; compare against a dt/8 reference
    def run(dt, n):
        s = RigidBodyState(q=quat_from_axis_angle([1, 1, 0], 0.4), v=[1.0, 0.0, 0.0], omega=[0.2, -0.1, 0.5])
        w = Wrench(14.0, [0.01, -0.02, 0.005])
        for _ in range(n):
            s = step_wrench(s, w, dt, params)
        return s.p

    ref = run(0.02 / 8, 400)
    e1 = np.linalg.norm(run(0.02, 50) - ref)
    e2 = np.linalg.norm(run(0.01, 100) - ref)
    assert 12 < e1 / e2 < 20
    assert GRAVITY == 9.81
