import math

import numpy as np
import pytest

from servobench.pose_algebra import (
    AxisAngle,
    PoseSE3,
    UnitQuaternion,
    ZeroQuaternionError,
    axis_angle_to_quat,
    canonicalize,
    compose,
    inverse,
    quat_from_angle_axis,
    quat_from_matrix,
    quat_geodesic_angle,
    quat_to_axis_angle,
    relative,
)

from oracles import pose_agrees, pose_to_matrix, random_pose, random_quat_wxyz

ROT_Z_90 = quat_from_angle_axis(math.pi / 2, (0, 0, 1))


def trans(x, y, z):
    return PoseSE3(UnitQuaternion.identity(), [x, y, z])


class TestCanonicalize:
    def test_scaling(self):
        q = canonicalize((2.0, 0.0, 0.0, 0.0))
        assert (q.w, q.x, q.y, q.z) == (1.0, 0.0, 0.0, 0.0)

    def test_sign_flip(self):
        c = math.cos(math.pi / 4)
        s = math.sin(math.pi / 4)
        q = canonicalize((-c, 0.0, 0.0, -s))
        assert q.w == pytest.approx(c, abs=1e-15)
        assert q.z == pytest.approx(s, abs=1e-15)

    def test_zero_raises(self):
        with pytest.raises(ZeroQuaternionError):
            canonicalize((0.0, 0.0, 0.0, 0.0))

    def test_w_zero_uses_first_nonzero_vector_sign(self):
        q = canonicalize((0.0, -1.0, 0.0, 0.0))
        assert q.x == 1.0
        q = canonicalize((0.0, 0.0, 0.0, -1.0))
        assert q.z == 1.0

    def test_unit_norm_always(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            q = canonicalize(rng.uniform(-10, 10, size=4))
            n = math.sqrt(q.w**2 + q.x**2 + q.y**2 + q.z**2)
            assert abs(n - 1.0) < 1e-9
            assert q.w >= 0.0


class TestCompose:
    def test_translation_then_rotation(self):
        c = compose(trans(1, 0, 0), PoseSE3(ROT_Z_90, [0, 0, 0]))
        np.testing.assert_allclose(c.translation, [1, 0, 0], atol=1e-15)
        assert quat_geodesic_angle(c.rotation, ROT_Z_90) < 1e-12

    def test_rotation_then_translation(self):
        c = compose(PoseSE3(ROT_Z_90, [0, 0, 0]), trans(1, 0, 0))
        np.testing.assert_allclose(c.translation, [0, 1, 0], atol=1e-15)

    def test_matches_matrix_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            a, b = random_pose(rng), random_pose(rng)
            assert pose_agrees(compose(a, b), pose_to_matrix(a) @ pose_to_matrix(b))

    def test_associativity(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            a, b, c = (random_pose(rng) for _ in range(3))
            left = compose(compose(a, b), c)
            right = compose(a, compose(b, c))
            assert np.linalg.norm(left.translation - right.translation) < 1e-9
            assert quat_geodesic_angle(left.rotation, right.rotation) < 1e-9


class TestInverse:
    def test_identity(self):
        inv = inverse(PoseSE3.identity())
        assert np.allclose(inv.translation, 0.0)
        assert inv.rotation == UnitQuaternion.identity()

    def test_pure_translation(self):
        inv = inverse(trans(1, 2, 3))
        np.testing.assert_allclose(inv.translation, [-1, -2, -3], atol=1e-15)

    def test_matches_matrix_inverse(self):
        rng = np.random.default_rng(13)
        for _ in range(300):
            a = random_pose(rng)
            assert pose_agrees(inverse(a), np.linalg.inv(pose_to_matrix(a)))

    def test_round_trip_is_identity(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            a = random_pose(rng)
            ident = compose(a, inverse(a))
            assert np.linalg.norm(ident.translation) < 1e-9
            assert quat_to_axis_angle(ident.rotation).theta < 1e-9


class TestRelative:
    def test_from_identity(self):
        rng = np.random.default_rng(15)
        x = random_pose(rng)
        rel = relative(PoseSE3.identity(), x)
        assert np.allclose(rel.translation, x.translation)
        assert rel.rotation == x.rotation

    def test_same_pose_gives_identity(self):
        rng = np.random.default_rng(16)
        a = random_pose(rng)
        rel = relative(a, a)
        assert np.linalg.norm(rel.translation) < 1e-12
        assert quat_to_axis_angle(rel.rotation).theta < 1e-12

    def test_round_trip_and_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(300):
            a, b = random_pose(rng), random_pose(rng)
            rel = relative(a, b)
            assert pose_agrees(
                rel, np.linalg.inv(pose_to_matrix(a)) @ pose_to_matrix(b)
            )
            back = compose(a, rel)
            assert np.linalg.norm(back.translation - b.translation) < 1e-9
            assert quat_geodesic_angle(back.rotation, b.rotation) < 1e-9


class TestAxisAngle:
    def test_identity_convention(self):
        aa = quat_to_axis_angle(UnitQuaternion.identity())
        assert aa.theta == 0.0
        np.testing.assert_array_equal(aa.axis, [1.0, 0.0, 0.0])

    def test_90_about_z(self):
        c, s = math.cos(math.pi / 4), math.sin(math.pi / 4)
        aa = quat_to_axis_angle(UnitQuaternion(c, 0, 0, s))
        assert aa.theta == pytest.approx(math.pi / 2, abs=1e-12)
        np.testing.assert_allclose(aa.axis, [0, 0, 1], atol=1e-12)

    def test_half_turn(self):
        q = axis_angle_to_quat(AxisAngle(math.pi, np.array([0.0, 0.0, 1.0])))
        assert (q.w, q.x, q.y, q.z) == pytest.approx((0, 0, 0, 1), abs=1e-15)

    def test_zero_angle_any_axis(self):
        q = axis_angle_to_quat(AxisAngle(0.0, np.array([0.0, 1.0, 0.0])))
        assert q == UnitQuaternion.identity()

    def test_round_trips(self):
        rng = np.random.default_rng(18)
        for _ in range(300):
            q = canonicalize(random_quat_wxyz(rng))
            back = axis_angle_to_quat(quat_to_axis_angle(q))
            assert quat_geodesic_angle(q, back) < 1e-9
        for _ in range(300):
            axis = rng.standard_normal(3)
            axis /= np.linalg.norm(axis)
            aa = AxisAngle(rng.uniform(0, math.pi), axis)
            back = quat_to_axis_angle(axis_angle_to_quat(aa))
            assert abs(back.theta - aa.theta) < 1e-9
            if aa.theta > 1e-6:
                assert np.linalg.norm(back.axis - aa.axis) < 1e-9

    def test_double_cover_collapse_exact(self):
        rng = np.random.default_rng(19)
        for _ in range(100):
            raw = random_quat_wxyz(rng)
            a = quat_to_axis_angle(canonicalize(raw))
            b = quat_to_axis_angle(canonicalize(-raw))
            assert a.theta == b.theta
            assert np.array_equal(a.axis, b.axis)

    def test_angles_always_in_range(self):
        rng = np.random.default_rng(20)
        for _ in range(300):
            aa = quat_to_axis_angle(canonicalize(random_quat_wxyz(rng)))
            assert 0.0 <= aa.theta <= math.pi


class TestSmallAngles:
    def test_tiny_rotation_round_trip(self):
        for theta in (1e-12, 1e-9, 1e-7, 1e-5):
            q = quat_from_angle_axis(theta, (0, 1, 0))
            aa = quat_to_axis_angle(q)
            assert aa.theta == pytest.approx(theta, rel=1e-6, abs=1e-15)

    def test_matrix_round_trip(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            q = canonicalize(random_quat_wxyz(rng))
            back = quat_from_matrix(q.rotation_matrix())
            assert quat_geodesic_angle(q, back) < 1e-9


class TestPoseSE3Invariants:
    def test_rotation_block_orthonormal(self):
        rng = np.random.default_rng(22)
        for _ in range(100):
            r = random_pose(rng).rotation.rotation_matrix()
            assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-9

    def test_matrix_round_trip(self):
        rng = np.random.default_rng(23)
        for _ in range(100):
            p = random_pose(rng)
            back = PoseSE3.from_matrix(p.matrix())
            assert np.linalg.norm(back.translation - p.translation) < 1e-12
            assert quat_geodesic_angle(back.rotation, p.rotation) < 1e-9

    def test_from_matrix_rejects_bad_bottom_row(self):
        m = np.eye(4)
        m[3, 3] = 2.0
        with pytest.raises(ValueError):
            PoseSE3.from_matrix(m)
