"""Trajectory ingestion, temporally-close pair sampling, and export.

On-disk trajectory convention: one ``frame-NNNNNN.pose.txt`` per frame
holding the camera-to-world transform as 16 whitespace-separated reals,
row-major 4x4.  Frame numbers must be contiguous; a missing file is a
hard error because gaps would silently corrupt the window semantics.

Training pairs are all ordered frame pairs whose index distance is at
most ``window`` (both directions), each labeled with the ground-truth
relative pose of the desired frame in the current frame.  Exports are
fully deterministic: re-running with the same inputs reproduces every
image, pose file, and manifest byte.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pose_algebra import (
    PoseSE3,
    PoseVector,
    compose,
    quat_from_angle_axis,
    quat_from_matrix,
    relative,
)
from .scene_renderer import CameraIntrinsics, PointScene, render, write_ppm

_FRAME_RE = re.compile(r"^frame-(\d{6})\.pose\.txt$")

MANIFEST_NAME = "manifest.jsonl"


class ParseError(ValueError):
    """Malformed or missing trajectory file."""


class NonRigidPoseError(ValueError):
    """Rotation block too far from orthonormal to trust."""


class EmptyTrajectoryError(ValueError):
    """Directory contains no pose files."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Ordered (frame_id, camera-to-world pose) records."""

    frames: tuple

    def __post_init__(self):
        if len(self.frames) < 1:
            raise EmptyTrajectoryError("trajectory needs at least one frame")
        ids = [fid for fid, _ in self.frames]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise ValueError("frame ids must be strictly increasing")
        object.__setattr__(self, "frames", tuple(self.frames))

    def __len__(self):
        return len(self.frames)

    def pose_of(self, frame_id: int) -> PoseSE3:
        for fid, pose in self.frames:
            if fid == frame_id:
                return pose
        raise KeyError(frame_id)


@dataclass(frozen=True, eq=False)
class PairSample:
    """One training pair: frame ids plus ground-truth relative pose."""

    id_current: int
    id_desired: int
    ground_truth: PoseVector

    def __post_init__(self):
        if self.id_current == self.id_desired:
            raise ValueError("pair must reference two distinct frames")


@dataclass(frozen=True)
class ExportSummary:
    manifest_path: Path
    pair_count: int
    image_count: int


def _parse_pose_file(path: Path) -> PoseSE3:
    try:
        tokens = path.read_text().split()
        values = [float(tok) for tok in tokens]
    except (OSError, ValueError) as exc:
        raise ParseError(f"{path.name}: {exc}") from exc
    if len(values) != 16:
        raise ParseError(f"{path.name}: expected 16 values, got {len(values)}")
    m = np.array(values).reshape(4, 4)
    if np.max(np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0]))) > 1e-6:
        raise ParseError(f"{path.name}: bottom row {m[3].tolist()} is not (0,0,0,1)")
    r = m[:3, :3]
    defect = float(np.max(np.abs(r.T @ r - np.eye(3))))
    if defect >= 1e-3:
        raise NonRigidPoseError(
            f"{path.name}: rotation block defect {defect:.2e} exceeds 1e-3"
        )
    if np.linalg.det(r) <= 0:
        raise NonRigidPoseError(f"{path.name}: rotation block is a reflection")
    # project onto the nearest rotation so downstream algebra stays exact
    u, _, vt = np.linalg.svd(r)
    r_fixed = u @ vt
    if np.linalg.det(r_fixed) < 0:
        r_fixed = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return PoseSE3(quat_from_matrix(r_fixed), m[:3, 3])


def load_trajectory(directory) -> Trajectory:
    """Load every ``frame-NNNNNN.pose.txt`` under ``directory``, sorted."""
    directory = Path(directory)
    found = {}
    for entry in directory.iterdir() if directory.is_dir() else []:
        match = _FRAME_RE.match(entry.name)
        if match:
            found[int(match.group(1))] = entry
    if not found:
        raise EmptyTrajectoryError(f"no frame-NNNNNN.pose.txt files in {directory}")
    ids = sorted(found)
    expected = range(ids[0], ids[-1] + 1)
    missing = sorted(set(expected) - set(ids))
    if missing:
        raise ParseError(f"missing frame files for ids {missing[:5]}")
    return Trajectory(tuple((fid, _parse_pose_file(found[fid])) for fid in ids))


def write_trajectory(traj: Trajectory, directory) -> None:
    """Write frames back out in the on-disk convention (exact round trip)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for fid, pose in traj.frames:
        m = pose.matrix()
        rows = "\n".join(" ".join(repr(v) for v in row) for row in m.tolist())
        (directory / f"frame-{fid:06d}.pose.txt").write_text(rows + "\n")


def pair_ground_truth(pose_i: PoseSE3, pose_j: PoseSE3) -> PoseVector:
    """Relative pose of frame j in frame i as a canonical pose vector."""
    return PoseVector.from_pose(relative(pose_i, pose_j))


def sample_pairs(traj: Trajectory, window: int) -> list:
    """All ordered pairs within ``window`` index steps, both directions.

    Deterministic order: by current index, then desired index.  A
    single-frame trajectory yields no pairs.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    frames = traj.frames
    pairs = []
    for i in range(len(frames)):
        lo = max(0, i - window)
        hi = min(len(frames), i + window + 1)
        for j in range(lo, hi):
            if j == i:
                continue
            pairs.append(
                PairSample(
                    frames[i][0],
                    frames[j][0],
                    pair_ground_truth(frames[i][1], frames[j][1]),
                )
            )
    return pairs


def manifest_record(sample: PairSample) -> str:
    """One manifest line; field order fixed for byte-stable output."""
    gt = sample.ground_truth
    return json.dumps(
        {
            "cur": f"frame-{sample.id_current:06d}.ppm",
            "des": f"frame-{sample.id_desired:06d}.ppm",
            "x": [float(v) for v in gt.x],
            "q": [gt.q.w, gt.q.x, gt.q.y, gt.q.z],
        },
        separators=(",", ":"),
    )


def export_dataset(traj: Trajectory, scene: PointScene, k: CameraIntrinsics,
                   window: int, out_dir, splat_radius: int = 1) -> ExportSummary:
    """Render one image per frame and write the pair manifest.

    Output directory contents: ``frame-NNNNNN.ppm`` (each frame rendered
    once, shared by every pair referencing it), ``frame-NNNNNN.pose.txt``,
    and ``manifest.jsonl`` with one record per ordered pair.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pairs = sample_pairs(traj, window)
    for fid, pose in traj.frames:
        write_ppm(render(scene, pose, k, splat_radius), out_dir / f"frame-{fid:06d}.ppm")
    write_trajectory(traj, out_dir)
    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, "w") as f:
        for sample in pairs:
            f.write(manifest_record(sample) + "\n")
    return ExportSummary(manifest_path, len(pairs), len(traj))


def random_ball_trajectory(seed: int, n_frames: int, center: PoseSE3,
                           radius_t: float, radius_r_deg: float) -> Trajectory:
    """Frames sampled i.i.d. in a pose ball around ``center``.

    Each frame offsets the center by a translation of uniform magnitude
    up to ``radius_t`` meters in a uniform direction, composed with a
    rotation of uniform magnitude up to ``radius_r_deg`` about a uniform
    axis.  Any two frames are then at most twice those radii apart, which
    bounds every sampled pair's ground-truth offset.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    rng = np.random.default_rng(seed)
    frames = []
    for fid in range(n_frames):
        direction = rng.standard_normal(3)
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            direction, norm = np.array([1.0, 0.0, 0.0]), 1.0
        t_local = direction / norm * rng.uniform(0.0, radius_t)
        axis = rng.standard_normal(3)
        if float(np.linalg.norm(axis)) == 0.0:
            axis = np.array([1.0, 0.0, 0.0])
        angle = np.radians(rng.uniform(0.0, radius_r_deg))
        offset = PoseSE3(quat_from_angle_axis(float(angle), axis), t_local)
        frames.append((fid, compose(center, offset)))
    return Trajectory(tuple(frames))
