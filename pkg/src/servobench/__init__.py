"""servobench: closed-loop relative-pose visual servoing simulator.

Core pieces: exact SE(3) pose algebra, a deterministic point-splat
renderer, temporally-windowed pose-pair dataset export, the decoupled
servo control law, a pluggable relative-pose estimator (ground-truth
oracle or external process over a JSON wire protocol), and a seeded
benchmark harness.
"""

__version__ = "0.1.0"

from .pose_algebra import AxisAngle, PoseSE3, PoseVector, UnitQuaternion  # noqa: F401
from .scene_renderer import RENDER_BACKEND  # noqa: F401
