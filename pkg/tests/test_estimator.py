import math
import shlex
import sys
from pathlib import Path

import numpy as np
import pytest

from servobench.estimator import (
    EstimatorTimeout,
    ExternalEstimatorClient,
    NoiseModel,
    ProcessDead,
    ProtocolError,
    oracle_estimate,
)
from servobench.pose_algebra import (
    PoseSE3,
    UnitQuaternion,
    compose,
    quat_geodesic_angle,
    quat_to_axis_angle,
)
from servobench.scene_renderer import DEFAULT_INTRINSICS, generate_scene, render

from oracles import random_pose

STUB = Path(__file__).parent / "stubs" / "estimator_stub.py"


def stub_command(mode: str) -> str:
    return f"{shlex.quote(sys.executable)} {shlex.quote(str(STUB))} {mode}"


def blank_images():
    scene = generate_scene(5, 20, 2.0)
    cam = PoseSE3(UnitQuaternion.identity(), [0, 0, -3])
    img = render(scene, cam, DEFAULT_INTRINSICS, 1)
    return img, img


class TestOracleEstimate:
    def test_noise_free_is_exact(self):
        rng = np.random.default_rng(70)
        noise = NoiseModel(0.0, 0.0)
        gen = np.random.default_rng(0)
        for _ in range(100):
            current, desired = random_pose(rng), random_pose(rng)
            est = oracle_estimate(current, desired, noise, gen)
            back = compose(current, est.as_pose())
            assert np.linalg.norm(back.translation - desired.translation) < 1e-9
            assert quat_geodesic_angle(back.rotation, desired.rotation) < 1e-9

    def test_noise_vanishes_at_goal(self):
        rng = np.random.default_rng(71)
        pose = random_pose(rng)
        gen = np.random.default_rng(1)
        est = oracle_estimate(pose, pose, NoiseModel(0.5, 0.5), gen)
        assert np.linalg.norm(est.x) < 1e-12
        assert quat_to_axis_angle(est.q).theta < 1e-9

    def test_translation_noise_statistics(self):
        rng = np.random.default_rng(72)
        current, desired = random_pose(rng), random_pose(rng)
        noise = NoiseModel(rel_sigma_t=0.05, rel_sigma_r=0.05)
        gen = np.random.default_rng(1234)
        exact = oracle_estimate(current, desired, NoiseModel(0, 0),
                                np.random.default_rng(0))
        t_norm = np.linalg.norm(exact.x)
        deltas = []
        for _ in range(1000):
            est = oracle_estimate(current, desired, noise, gen)
            deltas.extend(est.x - exact.x)
        std = float(np.std(deltas))
        assert abs(std - 0.05 * t_norm) < 0.15 * 0.05 * t_norm

    def test_rotation_noise_statistics(self):
        rng = np.random.default_rng(73)
        current, desired = random_pose(rng), random_pose(rng)
        noise = NoiseModel(rel_sigma_t=0.0, rel_sigma_r=0.05)
        gen = np.random.default_rng(99)
        exact = oracle_estimate(current, desired, NoiseModel(0, 0),
                                np.random.default_rng(0))
        theta = quat_to_axis_angle(exact.q).theta
        angles = []
        for _ in range(1000):
            est = oracle_estimate(current, desired, noise, gen)
            angles.append(quat_geodesic_angle(exact.q, est.q))
        # |N(0, s)| has mean s*sqrt(2/pi)
        expected_mean = 0.05 * theta * math.sqrt(2.0 / math.pi)
        assert abs(np.mean(angles) - expected_mean) < 0.15 * expected_mean

    def test_seeded_reproducibility(self):
        rng = np.random.default_rng(74)
        current, desired = random_pose(rng), random_pose(rng)
        noise = NoiseModel(0.05, 0.05, seed=7)
        gen_a = np.random.default_rng(42)
        gen_b = np.random.default_rng(42)
        for _ in range(50):
            a = oracle_estimate(current, desired, noise, gen_a)
            b = oracle_estimate(current, desired, noise, gen_b)
            assert np.array_equal(a.x, b.x)
            assert a.q == b.q

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            NoiseModel(-0.1, 0.0)


class TestExternalClient:
    def test_identity_stub(self):
        cur, des = blank_images()
        with ExternalEstimatorClient(stub_command("identity"), timeout=10.0) as client:
            est = client.estimate(cur, des)
        assert np.array_equal(est.x, [0.0, 0.0, 0.0])
        assert est.q == UnitQuaternion.identity()

    def test_scaled_quat_canonicalized(self):
        cur, des = blank_images()
        with ExternalEstimatorClient(stub_command("scaled-quat"), timeout=10.0) as client:
            est = client.estimate(cur, des)
        assert est.q == UnitQuaternion.identity()

    def test_multiple_requests(self):
        cur, des = blank_images()
        with ExternalEstimatorClient(stub_command("fixed"), timeout=10.0) as client:
            for _ in range(3):
                est = client.estimate(cur, des)
                np.testing.assert_allclose(est.x, [0.02, 0, 0])

    def test_timeout(self):
        cur, des = blank_images()
        with ExternalEstimatorClient(stub_command("timeout"), timeout=1.0) as client:
            with pytest.raises(EstimatorTimeout):
                client.estimate(cur, des)

    def test_malformed_reply(self):
        cur, des = blank_images()
        with ExternalEstimatorClient(stub_command("malformed"), timeout=10.0) as client:
            with pytest.raises(ProtocolError):
                client.estimate(cur, des)

    def test_error_reply(self):
        cur, des = blank_images()
        with ExternalEstimatorClient(stub_command("error-reply"), timeout=10.0) as client:
            with pytest.raises(ProtocolError):
                client.estimate(cur, des)

    def test_dead_process(self):
        cur, des = blank_images()
        with ExternalEstimatorClient(stub_command("dead"), timeout=10.0) as client:
            with pytest.raises(ProcessDead):
                client.estimate(cur, des)

    def test_no_handshake_times_out(self):
        with pytest.raises(EstimatorTimeout):
            ExternalEstimatorClient(stub_command("no-handshake"), timeout=1.0)

    def test_nonexistent_binary(self):
        with pytest.raises(ProcessDead):
            ExternalEstimatorClient("/nonexistent/binary-xyz", timeout=1.0)
