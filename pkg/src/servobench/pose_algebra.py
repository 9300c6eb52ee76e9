"""Quaternion and rigid-transform algebra shared by every module.

Conventions (fixed, also used verbatim in all file and wire formats):

* Quaternions are Hamilton, scalar-first ``(w, x, y, z)``, stored canonical:
  unit norm with ``w >= 0``; if ``w == 0`` the first nonzero of ``(x, y, z)``
  is positive.  Canonicalization collapses the double cover, so ``q`` and
  ``-q`` become the same value.
* ``PoseSE3`` is the rigid transform whose homogeneous matrix is
  ``[[R, t], [0, 1]]``; translations are meters.
* Axis-angle rotations carry an angle in ``[0, pi]``.  The zero rotation
  uses axis ``(1, 0, 0)`` by convention so the conversion is total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

ZERO_NORM_EPS = 1e-12


class ZeroQuaternionError(ValueError):
    """Raised when a (near-)zero quaternion would have to be normalized."""


def _canonical_wxyz(w: float, x: float, y: float, z: float):
    n = math.sqrt(w * w + x * x + y * y + z * z)
    if n <= ZERO_NORM_EPS:
        raise ZeroQuaternionError(f"quaternion norm {n:.3e} too small to normalize")
    w, x, y, z = w / n, x / n, y / n, z / n
    if w < 0.0:
        return -w, -x, -y, -z
    if w == 0.0:
        for c in (x, y, z):
            if c != 0.0:
                if c < 0.0:
                    return -w, -x, -y, -z
                break
    return w, x, y, z


@dataclass(frozen=True)
class UnitQuaternion:
    """Unit quaternion; the constructor normalizes and canonicalizes."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        w, x, y, z = _canonical_wxyz(
            float(self.w), float(self.x), float(self.y), float(self.z)
        )
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @staticmethod
    def identity() -> "UnitQuaternion":
        return UnitQuaternion(1.0, 0.0, 0.0, 0.0)

    def wxyz(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])

    def vec(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def conjugate(self) -> "UnitQuaternion":
        return UnitQuaternion(self.w, -self.x, -self.y, -self.z)

    def rotation_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        xx, yy, zz = x * x, y * y, z * z
        wx, wy, wz = w * x, w * y, w * z
        xy, xz, yz = x * y, x * z, y * z
        return np.array(
            [
                [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
                [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
                [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
            ]
        )


@dataclass(frozen=True, eq=False)
class AxisAngle:
    """Rotation as angle ``theta`` in [0, pi] about a unit ``axis``."""

    theta: float
    axis: np.ndarray

    def __post_init__(self):
        theta = float(self.theta)
        if not 0.0 <= theta <= math.pi + 1e-12:
            raise ValueError(f"theta {theta} outside [0, pi]")
        axis = np.asarray(self.axis, dtype=float).reshape(3).copy()
        n = float(np.linalg.norm(axis))
        if n <= ZERO_NORM_EPS:
            raise ValueError("axis has (near-)zero norm")
        axis /= n
        axis.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "axis", axis)

    def rotvec(self) -> np.ndarray:
        return self.theta * self.axis


@dataclass(frozen=True, eq=False)
class PoseSE3:
    """Rigid transform: rotation quaternion plus translation in meters."""

    rotation: UnitQuaternion
    translation: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3).copy()
        if not np.all(np.isfinite(t)):
            raise ValueError("translation must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "PoseSE3":
        return PoseSE3(UnitQuaternion.identity(), np.zeros(3))

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.rotation_matrix()
        m[:3, 3] = self.translation
        return m

    @staticmethod
    def from_matrix(m: np.ndarray) -> "PoseSE3":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise ValueError(f"expected 4x4 matrix, got {m.shape}")
        if np.max(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > 1e-9:
            raise ValueError("bottom row is not (0, 0, 0, 1)")
        r = m[:3, :3]
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
            raise ValueError("rotation block is not orthonormal")
        return PoseSE3(quat_from_matrix(r), m[:3, 3])

    def apply(self, point: np.ndarray) -> np.ndarray:
        """Map a point from this pose's local frame to the parent frame."""
        return rotate_vector(self.rotation, point) + self.translation


@dataclass(frozen=True, eq=False)
class PoseVector:
    """Translation + quaternion pair, the estimator's output form."""

    x: np.ndarray
    q: UnitQuaternion

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(3).copy()
        if not np.all(np.isfinite(x)):
            raise ValueError("translation must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    def as_pose(self) -> PoseSE3:
        return PoseSE3(self.q, self.x)

    @staticmethod
    def from_pose(pose: PoseSE3) -> "PoseVector":
        return PoseVector(pose.translation, pose.rotation)


def canonicalize(q_raw) -> UnitQuaternion:
    """Normalize a raw scalar-first 4-vector into a canonical quaternion."""
    arr = np.asarray(q_raw, dtype=float).reshape(4)
    return UnitQuaternion(arr[0], arr[1], arr[2], arr[3])


def quat_multiply(a: UnitQuaternion, b: UnitQuaternion) -> UnitQuaternion:
    """Hamilton product a*b (result re-canonicalized, so the sign may flip)."""
    w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z
    x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y
    y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x
    z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w
    return UnitQuaternion(w, x, y, z)


def rotate_vector(q: UnitQuaternion, v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    u = np.array([q.x, q.y, q.z])
    t = 2.0 * np.cross(u, v)
    return v + q.w * t + np.cross(u, t)


def quat_from_matrix(r: np.ndarray) -> UnitQuaternion:
    """Orthonormal 3x3 matrix to quaternion (Shepperd's branch method)."""
    r = np.asarray(r, dtype=float)
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        w = 0.25 * s
        x = (r[2, 1] - r[1, 2]) / s
        y = (r[0, 2] - r[2, 0]) / s
        z = (r[1, 0] - r[0, 1]) / s
    elif r[0, 0] > r[1, 1] and r[0, 0] > r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        w = (r[2, 1] - r[1, 2]) / s
        x = 0.25 * s
        y = (r[0, 1] + r[1, 0]) / s
        z = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] > r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        w = (r[0, 2] - r[2, 0]) / s
        x = (r[0, 1] + r[1, 0]) / s
        y = 0.25 * s
        z = (r[1, 2] + r[2, 1]) / s
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        w = (r[1, 0] - r[0, 1]) / s
        x = (r[0, 2] + r[2, 0]) / s
        y = (r[1, 2] + r[2, 1]) / s
        z = 0.25 * s
    return UnitQuaternion(w, x, y, z)


def quat_from_angle_axis(angle: float, axis) -> UnitQuaternion:
    """Quaternion for a rotation of ``angle`` (any real) about ``axis``."""
    axis = np.asarray(axis, dtype=float).reshape(3)
    n = float(np.linalg.norm(axis))
    if n <= ZERO_NORM_EPS:
        raise ValueError("axis has (near-)zero norm")
    h = 0.5 * angle
    s = math.sin(h) / n
    return UnitQuaternion(math.cos(h), s * axis[0], s * axis[1], s * axis[2])


def quat_exp_rotvec(phi) -> UnitQuaternion:
    """Exp of a rotation vector: angle ``|phi|`` about ``phi/|phi|``."""
    phi = np.asarray(phi, dtype=float).reshape(3)
    theta = float(np.linalg.norm(phi))
    half = 0.5 * theta
    if theta < 1e-8:
        # sin(t/2)/t series, stable at zero
        s = 0.5 - theta * theta / 48.0
    else:
        s = math.sin(half) / theta
    return UnitQuaternion(math.cos(half), s * phi[0], s * phi[1], s * phi[2])


def quat_from_euler_xyz(rx: float, ry: float, rz: float) -> UnitQuaternion:
    """Intrinsic XYZ Euler angles (radians): R = Rx(rx) Ry(ry) Rz(rz)."""
    qx = quat_from_angle_axis(rx, (1.0, 0.0, 0.0))
    qy = quat_from_angle_axis(ry, (0.0, 1.0, 0.0))
    qz = quat_from_angle_axis(rz, (0.0, 0.0, 1.0))
    return quat_multiply(quat_multiply(qx, qy), qz)


def quat_to_axis_angle(q: UnitQuaternion) -> AxisAngle:
    """Canonical quaternion to axis-angle with theta in [0, pi]."""
    s = math.sqrt(q.x * q.x + q.y * q.y + q.z * q.z)
    theta = 2.0 * math.atan2(s, q.w)
    if s == 0.0:
        return AxisAngle(0.0, np.array([1.0, 0.0, 0.0]))
    return AxisAngle(theta, np.array([q.x / s, q.y / s, q.z / s]))


def axis_angle_to_quat(aa: AxisAngle) -> UnitQuaternion:
    h = 0.5 * aa.theta
    s = math.sin(h)
    return UnitQuaternion(math.cos(h), s * aa.axis[0], s * aa.axis[1], s * aa.axis[2])


def quat_geodesic_angle(a: UnitQuaternion, b: UnitQuaternion) -> float:
    """Geodesic rotation angle between two quaternions, radians in [0, pi]."""
    d = quat_multiply(a.conjugate(), b)
    s = math.sqrt(d.x * d.x + d.y * d.y + d.z * d.z)
    return 2.0 * math.atan2(s, abs(d.w))


def compose(a: PoseSE3, b: PoseSE3) -> PoseSE3:
    """Pose product: M(result) = M(a) @ M(b)."""
    q = quat_multiply(a.rotation, b.rotation)
    t = rotate_vector(a.rotation, b.translation) + a.translation
    return PoseSE3(q, t)


def inverse(a: PoseSE3) -> PoseSE3:
    q_inv = a.rotation.conjugate()
    return PoseSE3(q_inv, -rotate_vector(q_inv, a.translation))


def relative(from_world: PoseSE3, to_world: PoseSE3) -> PoseSE3:
    """Pose of ``to_world`` expressed in the frame of ``from_world``."""
    return compose(inverse(from_world), to_world)
