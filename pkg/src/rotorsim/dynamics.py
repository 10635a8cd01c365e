"""Multirotor rigid-body dynamics with a quadratic rotor model and linear drag.

State layout (ENU inertial, FLU body)::

    p_dot     = v
    v_dot     = -g e3 + q ⊙ (T/m) e3 - q ⊙ (D (q⁻¹ ⊙ v))
    omega_dot = J⁻¹ (tau - omega × J omega)
    q_dot     = 0.5 skew4(omega) q

Integration is fixed-step RK4 with the wrench held constant over the step and
the quaternion renormalized once per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .frames import IDENTITY_QUAT, as_quat, as_vec3, quat_rotate, quat_rotate_inverse

GRAVITY = 9.81
MAX_DT = 0.02
DEFAULT_DT = 1.0 / 250.0


def _quad_x_positions(arm: float) -> list[np.ndarray]:
    # counter-clockwise from front-right so diagonal rotors share a spin sign
    a = arm / math.sqrt(2.0)
    return [
        np.array([a, -a, 0.0]),
        np.array([a, a, 0.0]),
        np.array([-a, a, 0.0]),
        np.array([-a, -a, 0.0]),
    ]


@dataclass
class MultirotorParams:
    """Physical vehicle description.

    Defaults are a 3DR-Iris-like quad-X; they are configuration choices, not
    measured values. ``spin_signs[i]`` multiplies ``k_torque * F_i`` in the yaw
    torque and must alternate ``+1, -1, +1, ...`` in rotor index order.
    """

    mass: float = 1.5
    inertia: np.ndarray = field(default_factory=lambda: np.array([0.029, 0.029, 0.055]))
    drag: np.ndarray = field(default_factory=lambda: np.array([0.26, 0.26, 0.0]))
    rotor_positions: list[np.ndarray] = field(default_factory=lambda: _quad_x_positions(0.25))
    spin_signs: list[int] = field(default_factory=lambda: [1, -1, 1, -1])
    c_thrust: float = 8.55e-6
    k_torque: float = 0.06
    max_rotor_speed: float = 1100.0
    g: float = GRAVITY

    def __post_init__(self):
        self.inertia = as_vec3(self.inertia)
        self.drag = as_vec3(self.drag)
        self.rotor_positions = [as_vec3(r) for r in self.rotor_positions]
        self.spin_signs = [int(s) for s in self.spin_signs]
        self.validate()

    @classmethod
    def quad_x(cls, arm: float = 0.25, **kwargs) -> "MultirotorParams":
        return cls(rotor_positions=_quad_x_positions(arm), **kwargs)

    @property
    def n_rotors(self) -> int:
        return len(self.rotor_positions)

    @property
    def max_rotor_force(self) -> float:
        return self.c_thrust * self.max_rotor_speed**2

    def validate(self) -> None:
        if not self.mass > 0:
            raise ValueError("mass must be positive")
        if not np.all(self.inertia > 0):
            raise ValueError("inertia components must be positive")
        if np.any(self.drag < 0):
            raise ValueError("drag coefficients must be non-negative")
        n = len(self.rotor_positions)
        if n < 4 or n % 2:
            raise ValueError(f"rotor count must be even and >= 4, got {n}")
        if len(self.spin_signs) != n:
            raise ValueError("spin_signs must have one entry per rotor")
        expected = [1 if i % 2 == 0 else -1 for i in range(n)]
        if self.spin_signs != expected:
            raise ValueError(f"spin_signs must alternate {expected}")
        if not self.c_thrust > 0:
            raise ValueError("c_thrust must be positive")
        if not self.max_rotor_speed > 0:
            raise ValueError("max_rotor_speed must be positive")


@dataclass
class RigidBodyState:
    """Vehicle state: position/velocity in ENU, attitude xyzw, body rates in FLU."""

    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    omega: np.ndarray = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0

    def __post_init__(self):
        self.p = as_vec3(self.p)
        self.v = as_vec3(self.v)
        self.q = as_quat(self.q)
        self.omega = as_vec3(self.omega)
        if abs(np.linalg.norm(self.q) - 1.0) > 1e-6:
            raise ValueError("state quaternion must be unit norm")
        if not math.isfinite(self.t):
            raise ValueError("state time must be finite")

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, self.q, self.omega])

    @classmethod
    def from_vector(cls, x, t: float) -> "RigidBodyState":
        x = np.asarray(x, dtype=float)
        return cls(p=x[0:3], v=x[3:6], q=x[6:10], omega=x[10:13], t=t)


@dataclass
class StateDerivative:
    p_dot: np.ndarray
    v_dot: np.ndarray
    q_dot: np.ndarray
    omega_dot: np.ndarray


@dataclass
class RotorCommand:
    speeds: np.ndarray
    saturated: bool = False

    def __post_init__(self):
        self.speeds = np.asarray(self.speeds, dtype=float)
        if self.speeds.ndim != 1:
            raise ValueError("rotor speeds must be a flat sequence")
        if not np.all(np.isfinite(self.speeds)):
            raise ValueError("rotor speeds must be finite")
        if np.any(self.speeds < 0):
            raise ValueError("rotor speeds must be non-negative")


@dataclass
class Wrench:
    thrust: float
    torque: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.thrust = float(self.thrust)
        self.torque = as_vec3(self.torque)
        if not math.isfinite(self.thrust) or self.thrust < 0:
            raise ValueError("collective thrust must be finite and non-negative")


def rotor_thrust(speed, c_thrust: float):
    """Quadratic rotor thrust ``F = c * speed**2`` (N). Speed in rad/s, >= 0."""
    s = np.asarray(speed, dtype=float)
    if np.any(s < 0):
        raise ValueError("rotor speed must be non-negative")
    f = c_thrust * s * s
    return float(f) if f.ndim == 0 else f


def allocation_matrix(params: MultirotorParams) -> np.ndarray:
    """Rows map rotor forces to ``[T, tau_x, tau_y, tau_z]``."""
    r = np.array(params.rotor_positions)
    return np.vstack(
        [
            np.ones(params.n_rotors),
            r[:, 1],
            -r[:, 0],
            params.k_torque * np.array(params.spin_signs, dtype=float),
        ]
    )


def wrench_from_forces(forces: Sequence[float], params: MultirotorParams) -> Wrench:
    f = np.asarray(forces, dtype=float)
    if f.shape != (params.n_rotors,):
        raise ValueError(f"expected {params.n_rotors} rotor forces, got shape {f.shape}")
    # explicit sums (no BLAS) so symmetric layouts cancel exactly
    T = tx = ty = tz = 0.0
    for fi, r, s in zip(f.tolist(), params.rotor_positions, params.spin_signs):
        T += fi
        # r × (F e3) = (r_y F, -r_x F, 0)
        tx += r[1] * fi
        ty -= r[0] * fi
        tz += s * fi
    return Wrench(T, np.array([tx, ty, params.k_torque * tz]))


def wrench_from_command(cmd: RotorCommand, params: MultirotorParams) -> Wrench:
    if cmd.speeds.shape != (params.n_rotors,):
        raise ValueError(f"expected {params.n_rotors} rotor speeds, got {cmd.speeds.shape}")
    speeds = np.minimum(cmd.speeds, params.max_rotor_speed)
    return wrench_from_forces(rotor_thrust(speeds, params.c_thrust), params)


def _derivative(x: Sequence[float], T: float, tau: Sequence[float], params: MultirotorParams):
    """Scalar-arithmetic derivative of the flat 13-vector (hot path)."""
    px, py, pz, vx, vy, vz, qx, qy, qz, qw, wx, wy, wz = x
    jx, jy, jz = params.inertia
    dx, dy, dz = params.drag
    m = params.mass

    # body -> world rotation matrix entries
    xx, yy, zz = qx * qx, qy * qy, qz * qz
    xy, xz, yz = qx * qy, qx * qz, qy * qz
    wxq, wyq, wzq = qw * qx, qw * qy, qw * qz
    r00, r01, r02 = 1 - 2 * (yy + zz), 2 * (xy - wzq), 2 * (xz + wyq)
    r10, r11, r12 = 2 * (xy + wzq), 1 - 2 * (xx + zz), 2 * (yz - wxq)
    r20, r21, r22 = 2 * (xz - wyq), 2 * (yz + wxq), 1 - 2 * (xx + yy)

    # drag in body axes: D (R^T v)
    bx = dx * (r00 * vx + r10 * vy + r20 * vz)
    by = dy * (r01 * vx + r11 * vy + r21 * vz)
    bz = dz * (r02 * vx + r12 * vy + r22 * vz)

    a = T / m
    ax = a * r02 - (r00 * bx + r01 * by + r02 * bz)
    ay = a * r12 - (r10 * bx + r11 * by + r12 * bz)
    az = a * r22 - (r20 * bx + r21 * by + r22 * bz) - params.g

    hx, hy, hz = jx * wx, jy * wy, jz * wz
    tx, ty, tz = tau
    dwx = (tx - (wy * hz - wz * hy)) / jx
    dwy = (ty - (wz * hx - wx * hz)) / jy
    dwz = (tz - (wx * hy - wy * hx)) / jz

    dqx = 0.5 * (wz * qy - wy * qz + wx * qw)
    dqy = 0.5 * (-wz * qx + wx * qz + wy * qw)
    dqz = 0.5 * (wy * qx - wx * qy + wz * qw)
    dqw = 0.5 * (-wx * qx - wy * qy - wz * qz)

    return (vx, vy, vz, ax, ay, az, dqx, dqy, dqz, dqw, dwx, dwy, dwz)


def state_derivative(state: RigidBodyState, wrench: Wrench, params: MultirotorParams) -> StateDerivative:
    d = _derivative(state.to_vector().tolist(), wrench.thrust, wrench.torque.tolist(), params)
    return StateDerivative(
        p_dot=np.array(d[0:3]),
        v_dot=np.array(d[3:6]),
        q_dot=np.array(d[6:10]),
        omega_dot=np.array(d[10:13]),
    )


def linear_acceleration(state: RigidBodyState, wrench: Wrench, params: MultirotorParams) -> np.ndarray:
    """Inertial acceleration ``v_dot``; written out independently for the IMU model."""
    thrust = quat_rotate(state.q, np.array([0.0, 0.0, wrench.thrust / params.mass]))
    drag = quat_rotate(state.q, params.drag * quat_rotate_inverse(state.q, state.v))
    return thrust - drag - np.array([0.0, 0.0, params.g])


def _check_dt(dt: float) -> None:
    if not (0.0 < dt <= MAX_DT):
        raise ValueError(f"dt must be in (0, {MAX_DT}] s, got {dt}")


def step_wrench(state: RigidBodyState, wrench: Wrench, dt: float, params: MultirotorParams) -> RigidBodyState:
    """One RK4 step under a constant body wrench."""
    _check_dt(dt)
    T = wrench.thrust
    tau = wrench.torque.tolist()
    x0 = state.to_vector().tolist()

    k1 = _derivative(x0, T, tau, params)
    k2 = _derivative([a + 0.5 * dt * b for a, b in zip(x0, k1)], T, tau, params)
    k3 = _derivative([a + 0.5 * dt * b for a, b in zip(x0, k2)], T, tau, params)
    k4 = _derivative([a + dt * b for a, b in zip(x0, k3)], T, tau, params)
    x1 = [
        a + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        for a, b1, b2, b3, b4 in zip(x0, k1, k2, k3, k4)
    ]
    qx, qy, qz, qw = x1[6:10]
    n = math.sqrt(qx * qx + qy * qy + qz * qz + qw * qw)
    x1[6:10] = [qx / n, qy / n, qz / n, qw / n]
    out = np.array(x1)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("state diverged to non-finite values")
    return replace(state, p=out[0:3], v=out[3:6], q=out[6:10], omega=out[10:13], t=state.t + dt)


def step(state: RigidBodyState, cmd: RotorCommand, dt: float, params: MultirotorParams) -> RigidBodyState:
    """Advance one physics step with rotor speeds applied instantaneously."""
    _check_dt(dt)
    return step_wrench(state, wrench_from_command(cmd, params), dt, params)
