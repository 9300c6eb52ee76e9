"""Decoupled pose-based servo control law.

The estimator hands over the relative pose of the desired camera frame in
the current camera frame.  The control law operates on the inverse of that
(current in desired), which decouples translation from rotation: the
resulting camera-frame velocity is ``v = +lambda * t_rel`` and
``w = -lambda * theta*u`` of the inverted rotation, so both error norms
contract at the same rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .pose_algebra import PoseVector, inverse, quat_to_axis_angle


class DofMode(Enum):
    SIX = "six"
    FOUR = "four"


@dataclass(frozen=True, eq=False)
class Twist:
    """Camera-frame velocity command: linear v (m/s), angular w (rad/s)."""

    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float).reshape(3).copy()
        w = np.asarray(self.w, dtype=float).reshape(3).copy()
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(w))):
            raise ValueError("twist components must be finite")
        v.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "w", w)

    @staticmethod
    def zero() -> "Twist":
        return Twist(np.zeros(3), np.zeros(3))


@dataclass(frozen=True)
class ControlConfig:
    """Step gain ``lam`` (1/s), DOF mode, optional speed clamps."""

    lam: float
    dof_mode: DofMode = DofMode.SIX
    max_v: float | None = None
    max_w: float | None = None

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lam must be positive")


def pbvs_twist(rel: PoseVector, cfg: ControlConfig) -> Twist:
    """Velocity command from the relative pose of desired-in-current.

    Forms the inverse pose (current in desired) with rotation R and
    translation t, then ``v = -lam * R^T t`` and ``w = -lam * theta*u``
    of R.  Note the identity ``R^T t = -rel.x``, so v equals
    ``+lam * rel.x``: the camera translates straight toward the goal in
    its own frame.
    """
    inv = inverse(rel.as_pose())
    r_t = inv.rotation.rotation_matrix().T
    v = -cfg.lam * (r_t @ inv.translation)
    aa = quat_to_axis_angle(inv.rotation)
    w = -cfg.lam * aa.rotvec()
    if cfg.max_v is not None:
        n = float(np.linalg.norm(v))
        if n > cfg.max_v:
            v *= cfg.max_v / n
    if cfg.max_w is not None:
        n = float(np.linalg.norm(w))
        if n > cfg.max_w:
            w *= cfg.max_w / n
    return Twist(v, w)


def project_4dof(t: Twist) -> Twist:
    """Suppress roll/pitch rates for under-actuated (quadrotor) flight."""
    return Twist(t.v, np.array([0.0, 0.0, t.w[2]]))
