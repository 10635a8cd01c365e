import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import hamilton_wxyz, rodrigues, rotate_by_product, wxyz_to_xyzw, xyzw_to_wxyz
from rotorsim.dynamics import RigidBodyState
from rotorsim.frames import (
    ENU_FLU,
    IDENTITY_QUAT,
    NED_FRD,
    FrameTag,
    convert_frame,
    quat_conjugate,
    quat_from_axis_angle,
    quat_from_matrix,
    quat_multiply,
    quat_normalize,
    quat_rotate,
    quat_rotate_inverse,
    quat_to_matrix,
    quat_yaw,
    skew4,
)


def random_quats(rng, n):
    q = rng.standard_normal((n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


finite = st.floats(-1e3, 1e3, allow_nan=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)
quat = (
    st.tuples(finite, finite, finite, finite)
    .filter(lambda t: sum(c * c for c in t) > 1e-6)
    .map(lambda t: np.array(t) / np.linalg.norm(t))
)


def test_identity_rotation():
    np.testing.assert_array_equal(quat_rotate(IDENTITY_QUAT, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])


def test_quarter_turn_about_z_matches_rodrigues():
    q = np.array([0.0, 0.0, math.sqrt(0.5), math.sqrt(0.5)])
    out = quat_rotate(q, [1.0, 0.0, 0.0])
    np.testing.assert_allclose(out, [0.0, 1.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(out, rodrigues([0, 0, 1], math.pi / 2) @ [1.0, 0.0, 0.0], atol=1e-15)


def test_rotation_agrees_with_oracles(rng):
    for _ in range(200):
        axis = rng.standard_normal(3)
        angle = rng.uniform(-math.pi, math.pi)
        v = rng.standard_normal(3)
        q = quat_from_axis_angle(axis, angle)
        np.testing.assert_allclose(quat_rotate(q, v), rodrigues(axis, angle) @ v, atol=1e-12)
        np.testing.assert_allclose(quat_rotate(q, v), rotate_by_product(q, v), atol=1e-12)
        np.testing.assert_allclose(quat_to_matrix(q), rodrigues(axis, angle), atol=1e-12)


def test_norm_preserved_for_a_million_rotations():
    rng = np.random.default_rng(3)
    q = random_quats(rng, 1_000_000)
    v = rng.standard_normal((1_000_000, 3)) * rng.uniform(1e-3, 1e3, (1_000_000, 1))
    out = quat_rotate(q, v)
    rel = np.abs(np.linalg.norm(out, axis=1) / np.linalg.norm(v, axis=1) - 1.0)
    assert rel.max() < 1e-12


@settings(max_examples=300, deadline=None)
@given(quat, vec3)
def test_rotate_inverse_undoes_rotate(q, v):
    np.testing.assert_allclose(quat_rotate_inverse(q, quat_rotate(q, v)), v, atol=1e-9)


def test_rotate_rejects_bad_input():
    with pytest.raises(ValueError):
        quat_rotate([0.0, 0.0, 0.0, 2.0], [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        quat_rotate(IDENTITY_QUAT, [math.nan, 0.0, 0.0])
    with pytest.raises(ValueError):
        quat_rotate([0.0, 0.0, math.inf, 1.0], [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        quat_rotate(IDENTITY_QUAT, [1.0, 0.0])


def test_quat_multiply_is_hamilton(rng):
    for p, q in zip(random_quats(rng, 100), random_quats(rng, 100)):
        expected = wxyz_to_xyzw(hamilton_wxyz(xyzw_to_wxyz(p), xyzw_to_wxyz(q)))
        np.testing.assert_allclose(quat_multiply(p, q), expected, atol=1e-15)


def test_composition_order(rng):
    # (p ⊗ q) ⊙ v = p ⊙ (q ⊙ v)
    for p, q in zip(random_quats(rng, 50), random_quats(rng, 50)):
        v = rng.standard_normal(3)
        np.testing.assert_allclose(quat_rotate(quat_multiply(p, q), v), quat_rotate(p, quat_rotate(q, v)), atol=1e-12)


def test_conjugate_and_normalize():
    q = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(quat_conjugate(q), [-1.0, -2.0, -3.0, 4.0])
    n = quat_normalize(q)
    assert abs(np.linalg.norm(n) - 1.0) < 1e-15
    with pytest.raises(ValueError):
        quat_normalize([0.0, 0.0, 0.0, 0.0])


def test_matrix_round_trip(rng):
    for q in random_quats(rng, 200):
        back = quat_from_matrix(quat_to_matrix(q))
        # q and -q are the same rotation
        assert min(np.abs(back - q).max(), np.abs(back + q).max()) < 1e-12


def test_yaw_extraction():
    for yaw in (-3.0, -1.0, 0.0, 0.5, 2.9):
        assert abs(quat_yaw(quat_from_axis_angle([0, 0, 1], yaw)) - yaw) < 1e-12


def test_skew4_zero_and_antisymmetric(rng):
    np.testing.assert_array_equal(skew4([0.0, 0.0, 0.0]), np.zeros((4, 4)))
    for _ in range(100):
        S = skew4(rng.standard_normal(3) * 10)
        np.testing.assert_array_equal(S + S.T, np.zeros((4, 4)))


def test_skew4_matches_quaternion_product(rng):
    # q_dot = 0.5 Sk(w) q  ==  0.5 q ⊗ (w, 0)
    r = 0.7
    np.testing.assert_allclose(0.5 * skew4([0, 0, r]) @ IDENTITY_QUAT, [0, 0, r / 2, 0], atol=0)
    for q in random_quats(rng, 100):
        w = rng.standard_normal(3)
        expected = 0.5 * quat_multiply(q, np.concatenate([w, [0.0]]))
        np.testing.assert_allclose(0.5 * skew4(w) @ q, expected, atol=1e-15)


def test_skew4_yaw_integration():
    # integrate q_dot = 0.5 Sk(w) q with RK4 at dt=1e-3 for 1 s
    r, dt = 1.0, 1e-3
    S = skew4([0.0, 0.0, r])
    q = IDENTITY_QUAT.copy()
    f = lambda x: 0.5 * S @ x  # noqa: E731
    for _ in range(1000):
        k1 = f(q)
        k2 = f(q + 0.5 * dt * k1)
        k3 = f(q + 0.5 * dt * k2)
        k4 = f(q + dt * k3)
        q = quat_normalize(q + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
    assert abs(quat_yaw(q) - r) < 1e-6


def test_enu_to_ned_and_flu_to_frd():
    np.testing.assert_array_equal(convert_frame([1.0, 2.0, 3.0], ENU_FLU, NED_FRD, "inertial"), [2.0, 1.0, -3.0])
    np.testing.assert_array_equal(convert_frame([1.0, 2.0, 3.0], ENU_FLU, NED_FRD, "body"), [1.0, -2.0, -3.0])
    np.testing.assert_array_equal(convert_frame([1.0, 2.0, 3.0], "ENU/FLU", "NED/FRD"), [2.0, 1.0, -3.0])


def test_mixed_tags_convert_one_side_only():
    enu_frd = FrameTag(ENU_FLU.inertial, NED_FRD.body)
    np.testing.assert_array_equal(convert_frame([1.0, 2.0, 3.0], ENU_FLU, enu_frd, "inertial"), [1.0, 2.0, 3.0])
    np.testing.assert_array_equal(convert_frame([1.0, 2.0, 3.0], ENU_FLU, enu_frd, "body"), [1.0, -2.0, -3.0])


@settings(max_examples=200, deadline=None)
@given(vec3, quat)
def test_conversion_is_involution(v, q):
    for kind in ("inertial", "body"):
        there = convert_frame(v, ENU_FLU, NED_FRD, kind)
        np.testing.assert_array_equal(convert_frame(there, NED_FRD, ENU_FLU, kind), v)
    qq = convert_frame(convert_frame(q, ENU_FLU, NED_FRD, "attitude"), NED_FRD, ENU_FLU, "attitude")
    assert min(np.abs(qq - q).max(), np.abs(qq + q).max()) < 1e-12


@settings(max_examples=200, deadline=None)
@given(vec3, quat)
def test_conversion_commutes_with_rotation(v, q):
    # convert(q ⊙ v_body) == convert(q) ⊙ convert(v_body)
    lhs = convert_frame(quat_rotate(q, v), ENU_FLU, NED_FRD, "inertial")
    q_ned = convert_frame(q, ENU_FLU, NED_FRD, "attitude")
    rhs = quat_rotate(q_ned, convert_frame(v, ENU_FLU, NED_FRD, "body"))
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + np.linalg.norm(v)))


def test_identity_attitude_maps_to_north_facing_frd():
    # body front pointing east in ENU means heading 90 deg in NED
    q_ned = convert_frame(IDENTITY_QUAT, ENU_FLU, NED_FRD, "attitude")
    np.testing.assert_allclose(quat_rotate(q_ned, [1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-15)


def test_state_conversion():
    s = RigidBodyState(p=[1.0, 2.0, 3.0], v=[4.0, 5.0, 6.0], omega=[0.1, 0.2, 0.3])
    out = convert_frame(s, ENU_FLU, NED_FRD)
    np.testing.assert_array_equal(out.p, [2.0, 1.0, -3.0])
    np.testing.assert_array_equal(out.v, [5.0, 4.0, -6.0])
    np.testing.assert_array_equal(out.omega, [0.1, -0.2, -0.3])


def test_unsupported_tags_rejected():
    with pytest.raises(ValueError):
        convert_frame([1.0, 2.0, 3.0], "ENU/FLU", "ECEF/FRD")
    with pytest.raises(ValueError):
        convert_frame([1.0, 2.0, 3.0], ENU_FLU, NED_FRD, "spinor")
