"""Control backends, reference trajectories and the geometric tracking controller.

A control backend receives the vehicle state and sensor readings through
callbacks and is asked for one :class:`RotorCommand` per physics step.

The tracking controller follows Mellinger & Kumar (ICRA 2011): a PD law on
position with acceleration feed-forward gives the desired force, whose
direction and the reference yaw fix the desired attitude; attitude and rate
errors on SO(3) give the body torque, and the resulting wrench is mapped back
through the allocation matrix and the quadratic rotor curve.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import MultirotorParams, RigidBodyState, RotorCommand, Wrench, allocation_matrix
from .frames import E3, as_vec3, cross3, quat_to_matrix


@dataclass
class FlatReference:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    jerk: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    yaw_rate: float = 0.0

    def __post_init__(self):
        self.position = as_vec3(self.position)
        self.velocity = as_vec3(self.velocity)
        self.acceleration = as_vec3(self.acceleration)
        self.jerk = as_vec3(self.jerk)
        if not (math.isfinite(self.yaw) and math.isfinite(self.yaw_rate)):
            raise ValueError("reference yaw must be finite")


@dataclass
class ControllerGains:
    """Position gains are in N/m and N/(m/s); attitude gains in N·m/rad and N·m/(rad/s)."""

    kp: np.ndarray = field(default_factory=lambda: np.array([12.0, 12.0, 15.0]))
    kv: np.ndarray = field(default_factory=lambda: np.array([6.0, 6.0, 7.5]))
    kR: np.ndarray = field(default_factory=lambda: np.array([2.0, 2.0, 0.5]))
    kw: np.ndarray = field(default_factory=lambda: np.array([0.25, 0.25, 0.12]))

    def __post_init__(self):
        for name in ("kp", "kv", "kR", "kw"):
            value = as_vec3(getattr(self, name))
            if np.any(value < 0):
                raise ValueError(f"gain {name} must be non-negative")
            setattr(self, name, value)


# -- trajectories ------------------------------------------------------------


def relay_trajectory(t: float, s: float = 0.6) -> FlatReference:
    """Aggressive relay manoeuvre: ``x = t``, ``y = g(t)``, ``z = 1 + g(t)``.

    ``g(t) = exp(-0.5 (t/s)^2) / s``; smaller ``s`` gives a sharper, taller bump.
    Derivatives up to jerk are analytic.
    """
    if not s > 0:
        raise ValueError("aggressiveness parameter s must be positive")
    u = t / s
    g = math.exp(-0.5 * u * u) / s
    s2 = s * s
    g1 = -t / s2 * g
    g2 = (t * t / (s2 * s2) - 1.0 / s2) * g
    g3 = (3.0 * t / (s2 * s2) - t**3 / (s2 * s2 * s2)) * g
    return FlatReference(
        position=np.array([t, g, 1.0 + g]),
        velocity=np.array([1.0, g1, g1]),
        acceleration=np.array([0.0, g2, g2]),
        jerk=np.array([0.0, g3, g3]),
    )


def hover_reference(position) -> FlatReference:
    return FlatReference(position=position)


class RelayPath:
    """Relay manoeuvre placed in simulation time.

    ``t_start`` is the trajectory parameter at simulation time zero. ``mirror``
    negates the chosen horizontal axes so a second vehicle can fly the mirrored
    copy; ``offset`` shifts the whole path.
    """

    def __init__(self, s: float = 0.6, t_start: float = -3.0, mirror_x: bool = False,
                 mirror_y: bool = False, offset=(0.0, 0.0, 0.0)):
        if not s > 0:
            raise ValueError("aggressiveness parameter s must be positive")
        self.s = s
        self.t_start = t_start
        self.sign = np.array([-1.0 if mirror_x else 1.0, -1.0 if mirror_y else 1.0, 1.0])
        self.offset = as_vec3(offset)

    def __call__(self, sim_t: float) -> FlatReference:
        ref = relay_trajectory(sim_t + self.t_start, self.s)
        k = self.sign
        return FlatReference(
            position=k * ref.position + self.offset,
            velocity=k * ref.velocity,
            acceleration=k * ref.acceleration,
            jerk=k * ref.jerk,
        )


# -- allocation --------------------------------------------------------------


def allocation_inverse(wrench: Wrench, params: MultirotorParams) -> RotorCommand:
    """Rotor speeds realising ``wrench``; forces are clamped to ``[0, F_max]``.

    For a quad the allocation matrix is square and inverted exactly; larger
    rotor counts use the minimum-norm pseudo-inverse solution.
    """
    A = allocation_matrix(params)
    b = np.concatenate([[wrench.thrust], wrench.torque])
    if A.shape[0] == A.shape[1]:
        forces = np.linalg.solve(A, b)
    else:
        forces = np.linalg.pinv(A) @ b
    f_max = params.max_rotor_force
    clipped = np.clip(forces, 0.0, f_max)
    saturated = bool(np.any(clipped != forces))
    speeds = np.sqrt(clipped / params.c_thrust)
    return RotorCommand(speeds=speeds, saturated=saturated)


# -- backends ----------------------------------------------------------------


class ControlBackend(ABC):
    """Pluggable consumer of state and sensor data producing rotor targets."""

    def start(self) -> None:
        pass

    def stop(self) -> None:
        pass

    def receive_state(self, state: RigidBodyState) -> None:
        pass

    def receive_sensor(self, reading) -> None:
        pass

    @abstractmethod
    def rotor_command(self) -> RotorCommand:
        ...

    # reference reported in telemetry; backends without one return None
    def current_reference(self) -> FlatReference | None:
        return None


def _vee(M: np.ndarray) -> np.ndarray:
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


@dataclass
class ControlOutput:
    command: RotorCommand
    wrench: Wrench
    thrust_clamped: bool = False


def geometric_control_update(
    state: RigidBodyState,
    ref: FlatReference,
    gains: ControllerGains,
    params: MultirotorParams,
    drag_compensation: bool = True,
    min_thrust: float | None = None,
) -> ControlOutput:
    """One evaluation of the geometric tracking controller.

    ``drag_compensation`` adds the known linear-drag force at the reference
    velocity to the feed-forward. If the projected thrust is not positive it
    is clamped to ``min_thrust`` (default 1 % of weight) and flagged.
    """
    m, g = params.mass, params.g
    R = quat_to_matrix(state.q)

    e_p = state.p - ref.position
    e_v = state.v - ref.velocity
    a_ff = ref.acceleration.copy()
    if drag_compensation:
        a_ff = a_ff + R @ (params.drag * (R.T @ ref.velocity))
    F_des = -gains.kp * e_p - gains.kv * e_v + m * g * E3 + m * a_ff

    z_b = R[:, 2]
    T = float(F_des @ z_b)
    clamped = False
    floor = 0.01 * m * g if min_thrust is None else min_thrust
    if T <= floor:
        T = floor
        clamped = True

    norm_f = float(np.linalg.norm(F_des))
    z_des = F_des / norm_f if norm_f > 1e-9 else z_b
    x_c = np.array([math.cos(ref.yaw), math.sin(ref.yaw), 0.0])
    y_des = cross3(z_des, x_c)
    ny = np.linalg.norm(y_des)
    if ny < 1e-9:
        # desired thrust axis is horizontal along the heading; keep current body y
        y_des = R[:, 1]
    else:
        y_des = y_des / ny
    x_des = cross3(y_des, z_des)
    R_des = np.column_stack([x_des, y_des, z_des])

    e_R = 0.5 * _vee(R_des.T @ R - R.T @ R_des)

    # desired body rates from the jerk feed-forward
    h_w = (m / T) * (ref.jerk - (z_des @ ref.jerk) * z_des)
    w_des_frame = np.array([-h_w @ y_des, h_w @ x_des, ref.yaw_rate * z_des[2]])
    w_des = R.T @ (R_des @ w_des_frame)
    e_w = state.omega - w_des

    J = params.inertia
    tau = -gains.kR * e_R - gains.kw * e_w + cross3(state.omega, J * state.omega)

    wrench = Wrench(T, tau)
    cmd = allocation_inverse(wrench, params)
    return ControlOutput(command=cmd, wrench=wrench, thrust_clamped=clamped)


class GeometricBackend(ControlBackend):
    """Tracks a time-indexed reference with full state feedback."""

    def __init__(self, params: MultirotorParams, reference: Callable[[float], FlatReference],
                 gains: ControllerGains | None = None, drag_compensation: bool = True):
        self.params = params
        self.reference = reference
        self.gains = gains or ControllerGains()
        self.drag_compensation = drag_compensation
        self.state: RigidBodyState | None = None
        self.last_output: ControlOutput | None = None
        self._ref: FlatReference | None = None

    def receive_state(self, state: RigidBodyState) -> None:
        self.state = state

    def current_reference(self) -> FlatReference | None:
        if self.state is None:
            return None
        if self._ref is None:
            self._ref = self.reference(self.state.t)
        return self._ref

    def rotor_command(self) -> RotorCommand:
        if self.state is None:
            raise RuntimeError("controller has not received a state yet")
        ref = self.reference(self.state.t)
        self._ref = ref
        self.last_output = geometric_control_update(
            self.state, ref, self.gains, self.params, self.drag_compensation
        )
        return self.last_output.command


class ScriptBackend(ControlBackend):
    """Open-loop rotor speeds from a constant list or a function of time."""

    def __init__(self, params: MultirotorParams, speeds=None):
        self.params = params
        self.t = 0.0
        if speeds is None:
            hover = math.sqrt(params.mass * params.g / (params.n_rotors * params.c_thrust))
            speeds = [hover] * params.n_rotors
        self.speeds = speeds

    def receive_state(self, state: RigidBodyState) -> None:
        self.t = state.t

    def rotor_command(self) -> RotorCommand:
        s = self.speeds(self.t) if callable(self.speeds) else self.speeds
        s = np.asarray(s, dtype=float)
        if s.shape != (self.params.n_rotors,):
            raise ValueError(f"script produced {s.shape} speeds for {self.params.n_rotors} rotors")
        clipped = np.clip(s, 0.0, self.params.max_rotor_speed)
        return RotorCommand(clipped, saturated=bool(np.any(clipped != s)))
