"""Quaternion algebra and inertial/body frame conventions.

Quaternions are stored as ``[qx, qy, qz, qw]`` and composed with the Hamilton
product. A vehicle attitude ``q`` maps body-frame vectors into the inertial
frame: ``v_inertial = quat_rotate(q, v_body)``.

All computations in the simulator run in ENU (inertial) / FLU (body). PX4
expects NED / FRD, so sensor data is converted at the MAVLink boundary with
:func:`convert_frame`.

The body-rate kinematic matrix used for ``q_dot = 0.5 * skew4(w) @ q`` is::

    [[  0,   wz, -wy,  wx],
     [-wz,    0,  wx,  wy],
     [ wy,  -wx,   0,  wz],
     [-wx,  -wy, -wz,   0]]

which equals the product ``0.5 * q (x) [w, 0]`` written as a matrix acting on q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

IDENTITY_QUAT = np.array([0.0, 0.0, 0.0, 1.0])
E3 = np.array([0.0, 0.0, 1.0])

_NORM_TOL = 1e-6


class Inertial(str, Enum):
    ENU = "ENU"
    NED = "NED"


class Body(str, Enum):
    FLU = "FLU"
    FRD = "FRD"


@dataclass(frozen=True)
class FrameTag:
    inertial: Inertial = Inertial.ENU
    body: Body = Body.FLU

    def __str__(self) -> str:
        return f"{self.inertial.value}/{self.body.value}"


ENU_FLU = FrameTag(Inertial.ENU, Body.FLU)
NED_FRD = FrameTag(Inertial.NED, Body.FRD)

# ENU <-> NED is a rotation by pi about (1, 1, 0)/sqrt(2); FLU <-> FRD a rotation
# by pi about x. Both matrices are symmetric and their own inverse.
_ENU_NED = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
_FLU_FRD = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
_Q_ENU_NED = np.array([math.sqrt(0.5), math.sqrt(0.5), 0.0, 0.0])
_Q_FLU_FRD = np.array([1.0, 0.0, 0.0, 0.0])


def _check_finite(name: str, a: np.ndarray) -> None:
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite values")


def cross3(a, b) -> np.ndarray:
    """Cross product; avoids ``np.cross`` overhead for single 3-vectors."""
    if a.shape == (3,) and b.shape == (3,):
        ax, ay, az = a
        bx, by, bz = b
        return np.array([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx])
    return np.cross(a, b)


def as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.shape[-1:] != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    _check_finite("vector", a)
    return a


def as_quat(q) -> np.ndarray:
    a = np.asarray(q, dtype=float)
    if a.shape[-1:] != (4,):
        raise ValueError(f"expected an xyzw quaternion, got shape {a.shape}")
    _check_finite("quaternion", a)
    return a


def quat_normalize(q) -> np.ndarray:
    q = as_quat(q)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def quat_conjugate(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.concatenate([-q[..., :3], q[..., 3:]], axis=-1)


def quat_multiply(p, q) -> np.ndarray:
    """Hamilton product ``p (x) q`` for xyzw quaternions (broadcasts)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pv, pw = p[..., :3], p[..., 3:]
    qv, qw = q[..., :3], q[..., 3:]
    vec = pw * qv + qw * pv + cross3(pv, qv)
    w = pw * qw - np.sum(pv * qv, axis=-1, keepdims=True)
    return np.concatenate([vec, w], axis=-1)


def quat_rotate(q, v) -> np.ndarray:
    """Rotate ``v`` by unit quaternion ``q`` (the ``q ⊙ v`` operator).

    Accepts single vectors or stacked arrays of shape ``(..., 4)`` / ``(..., 3)``.
    Raises ``ValueError`` on non-finite input or a quaternion whose norm is off
    by more than 1e-6.
    """
    q = as_quat(q)
    v = as_vec3(v)
    n = np.sqrt(np.sum(q * q, axis=-1))
    if (np.abs(n - 1.0) > _NORM_TOL).any():
        raise ValueError("quat_rotate requires a unit quaternion")
    u = q[..., :3]
    w = q[..., 3:]
    t = 2.0 * cross3(u, v)
    return v + w * t + cross3(u, t)


def quat_rotate_inverse(q, v) -> np.ndarray:
    """``q⁻¹ ⊙ v``: express an inertial vector in the body frame."""
    return quat_rotate(quat_conjugate(as_quat(q)), v)


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    axis = as_vec3(axis)
    axis = axis / np.linalg.norm(axis)
    half = 0.5 * angle
    return np.concatenate([axis * math.sin(half), [math.cos(half)]])


def quat_to_matrix(q) -> np.ndarray:
    """Body-to-inertial rotation matrix (columns are body axes in inertial)."""
    x, y, z, w = as_quat(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_matrix(R) -> np.ndarray:
    """Inverse of :func:`quat_to_matrix` (Shepperd's method), returns qw >= 0."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0.0:
        s = 2.0 * math.sqrt(tr + 1.0)
        q = [(R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s, 0.25 * s]
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s, (R[2, 1] - R[1, 2]) / s]
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s, (R[0, 2] - R[2, 0]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s, (R[1, 0] - R[0, 1]) / s]
    q = np.array(q)
    if q[3] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def quat_yaw(q) -> float:
    """Heading angle about the inertial z axis (rad, ENU: 0 = facing east)."""
    x, y, z, w = as_quat(q)
    return math.atan2(2.0 * (w * z + x * y), 1.0 - 2.0 * (y * y + z * z))


def skew4(omega) -> np.ndarray:
    """4x4 skew-symmetric body-rate matrix, ``q_dot = 0.5 * skew4(w) @ q``."""
    wx, wy, wz = as_vec3(omega)
    return np.array(
        [
            [0.0, wz, -wy, wx],
            [-wz, 0.0, wx, wy],
            [wy, -wx, 0.0, wz],
            [-wx, -wy, -wz, 0.0],
        ]
    )


def _inertial_matrix(src: FrameTag, dst: FrameTag) -> np.ndarray | None:
    return None if src.inertial == dst.inertial else _ENU_NED


def _body_matrix(src: FrameTag, dst: FrameTag) -> np.ndarray | None:
    return None if src.body == dst.body else _FLU_FRD


def _coerce_tag(tag) -> FrameTag:
    if isinstance(tag, FrameTag):
        return tag
    if isinstance(tag, str) and "/" in tag:
        inertial, body = tag.split("/", 1)
        try:
            return FrameTag(Inertial(inertial), Body(body))
        except ValueError:
            pass
    raise ValueError(f"unsupported frame tag {tag!r}")


def convert_frame(value, src, dst, kind: str = "inertial"):
    """Convert a vector, quaternion or :class:`~rotorsim.dynamics.RigidBodyState`.

    ``kind`` says how a bare array is interpreted: ``"inertial"`` (position,
    velocity, world field vectors), ``"body"`` (rates, specific force) or
    ``"attitude"`` (xyzw body-to-inertial quaternion). States are converted
    field by field and ``kind`` is ignored.
    """
    src = _coerce_tag(src)
    dst = _coerce_tag(dst)

    # avoid a circular import; states are duck-typed on their fields
    if hasattr(value, "q") and hasattr(value, "omega"):
        from dataclasses import replace

        return replace(
            value,
            p=convert_frame(value.p, src, dst, "inertial"),
            v=convert_frame(value.v, src, dst, "inertial"),
            q=convert_frame(value.q, src, dst, "attitude"),
            omega=convert_frame(value.omega, src, dst, "body"),
        )

    if kind == "inertial":
        v = as_vec3(value)
        M = _inertial_matrix(src, dst)
        return v.copy() if M is None else v @ M.T
    if kind == "body":
        v = as_vec3(value)
        M = _body_matrix(src, dst)
        return v.copy() if M is None else v @ M.T
    if kind == "attitude":
        q = as_quat(value)
        if src.inertial != dst.inertial:
            q = quat_multiply(_Q_ENU_NED, q)
        if src.body != dst.body:
            q = quat_multiply(q, _Q_FLU_FRD)
        return q
    raise ValueError(f"unknown conversion kind {kind!r}")
