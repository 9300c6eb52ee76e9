"""Pose regression loss and the evaluation error metrics.

The training loss is ``||x_hat - x|| + beta * ||q_hat - q/||q|| ||``.
Only the ground-truth quaternion is normalized; the prediction enters raw.
That asymmetry is deliberate and load-bearing: a trained regressor is
rewarded for emitting unit-norm quaternions rather than having them
normalized away, and the ground truth must be sign-canonical for the
target to be well-posed (see the dataset module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .pose_algebra import (
    ZERO_NORM_EPS,
    PoseVector,
    ZeroQuaternionError,
    quat_geodesic_angle,
)

#: Stated optimum for balancing the translation and rotation terms.
DEFAULT_BETA = 500_000.0


@dataclass(frozen=True)
class LossConfig:
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")


def pose_loss(pred, gt, cfg: LossConfig = LossConfig()) -> float:
    """Weighted pose loss between (x_hat, q_hat_raw) and (x, q_raw).

    ``pred`` and ``gt`` are (3-vector, raw 4-vector) pairs.  The ground
    truth quaternion is normalized; the predicted one is not.
    """
    x_hat = np.asarray(pred[0], dtype=float).reshape(3)
    q_hat = np.asarray(pred[1], dtype=float).reshape(4)
    x = np.asarray(gt[0], dtype=float).reshape(3)
    q = np.asarray(gt[1], dtype=float).reshape(4)
    q_norm = float(np.linalg.norm(q))
    if q_norm <= ZERO_NORM_EPS:
        raise ZeroQuaternionError("ground-truth quaternion has (near-)zero norm")
    t_term = float(np.linalg.norm(x_hat - x))
    r_term = float(np.linalg.norm(q_hat - q / q_norm))
    return t_term + cfg.beta * r_term


def translation_error(pred: PoseVector, gt: PoseVector) -> float:
    """Euclidean translation error in millimeters."""
    return 1000.0 * float(np.linalg.norm(pred.x - gt.x))


def rotation_error_deg(pred: PoseVector, gt: PoseVector) -> float:
    """Geodesic angle of the relative rotation, degrees in [0, 180]."""
    return math.degrees(quat_geodesic_angle(pred.q, gt.q))
