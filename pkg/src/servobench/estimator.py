"""Relative-pose estimators: a geometric oracle and an external client.

The servo loop only ever sees a ``PoseVector`` estimate of the desired
camera frame expressed in the current camera frame.  The oracle computes
it exactly from the simulator's ground truth, optionally degraded by
multiplicative noise that emulates a learned estimator's residual error.
The external client speaks wire protocol v1 to a child process:

    handshake (child -> parent):  {"v":1,"ready":true}
    request   (parent -> child):  {"v":1,"cur":"<path>.ppm","des":"<path>.ppm"}
    response  (child -> parent):  {"v":1,"x":[x,y,z],"q":[w,qx,qy,qz]}
    error     (child -> parent):  {"v":1,"error":"<message>"}

newline-delimited JSON on the child's stdin/stdout, one request in flight.
Images are passed by file path as binary PPM.
"""

from __future__ import annotations

import json
import queue
import shlex
import shutil
import subprocess
import tempfile
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pose_algebra import (
    PoseSE3,
    PoseVector,
    ZeroQuaternionError,
    canonicalize,
    quat_from_angle_axis,
    quat_multiply,
    quat_to_axis_angle,
    relative,
)
from .scene_renderer import Image, write_ppm

PROTOCOL_VERSION = 1


class EstimatorError(RuntimeError):
    """Base class for estimator failures."""


class EstimatorTimeout(EstimatorError):
    """Peer produced no response line within the configured limit."""


class ProtocolError(EstimatorError):
    """Peer replied, but not with a parseable protocol-v1 estimate."""


class ProcessDead(EstimatorError):
    """Peer process exited or could not be spawned."""


@dataclass(frozen=True)
class NoiseModel:
    """Multiplicative estimate noise; sigmas are fractions of magnitude."""

    rel_sigma_t: float = 0.0
    rel_sigma_r: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.rel_sigma_t < 0 or self.rel_sigma_r < 0:
            raise ValueError("noise sigmas must be >= 0")


@dataclass(frozen=True)
class Oracle:
    """Estimator backed by simulator ground truth plus NoiseModel."""

    noise: NoiseModel = NoiseModel()


@dataclass(frozen=True)
class External:
    """Estimator spawned from a command line, protocol v1 over stdio."""

    command: str
    timeout: float = 10.0

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


EstimatorKind = Oracle | External


def oracle_estimate(current: PoseSE3, desired: PoseSE3, noise: NoiseModel,
                    rng: np.random.Generator) -> PoseVector:
    """Exact relative pose of desired-in-current, perturbed by ``noise``.

    Per call the generator is advanced by exactly seven normal draws
    (3 translation, 3 axis, 1 angle) regardless of the sigmas, so a run
    is reproducible from the seed and the call index alone.  Translation
    noise is an isotropic Gaussian with per-axis std
    ``rel_sigma_t * |t|``; rotation noise is an extra rotation about a
    random axis by a Gaussian angle of std ``rel_sigma_r * theta``,
    right-multiplied onto the exact rotation.  Both vanish at the goal.
    """
    rel = relative(current, desired)
    g_t = rng.standard_normal(3)
    g_axis = rng.standard_normal(3)
    g_ang = rng.standard_normal()

    t = rel.translation
    x = t + noise.rel_sigma_t * float(np.linalg.norm(t)) * g_t

    q = rel.rotation
    theta = quat_to_axis_angle(q).theta
    delta = noise.rel_sigma_r * theta * float(g_ang)
    if delta != 0.0:
        axis_norm = float(np.linalg.norm(g_axis))
        axis = g_axis if axis_norm > 0 else np.array([1.0, 0.0, 0.0])
        q = quat_multiply(q, quat_from_angle_axis(delta, axis))
    return PoseVector(x, q)


class _LineReader:
    """Background reader so response waits can honor a deadline."""

    _EOF = object()

    def __init__(self, stream):
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._pump, args=(stream,),
                                        daemon=True)
        self._thread.start()

    def _pump(self, stream):
        try:
            for line in iter(stream.readline, b""):
                self._queue.put(line)
        finally:
            self._queue.put(self._EOF)

    def get(self, timeout: float):
        """One line, None on timeout, or _EOF once the stream closes."""
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None


class ExternalEstimatorClient:
    """Session with one external estimator process.

    Stateful and not thread-safe: exactly one request may be in flight.
    Request images are rewritten to ``cur.ppm`` / ``des.ppm`` inside the
    session workspace on every call.
    """

    def __init__(self, command: str, timeout: float, workspace=None):
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        self._timeout = timeout
        if workspace is None:
            self._workspace = Path(tempfile.mkdtemp(prefix="servobench-est-"))
            self._own_workspace = True
        else:
            self._workspace = Path(workspace)
            self._workspace.mkdir(parents=True, exist_ok=True)
            self._own_workspace = False
        argv = shlex.split(command)
        try:
            self._proc = subprocess.Popen(
                argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
            )
        except OSError as exc:
            raise ProcessDead(f"failed to spawn estimator {argv!r}: {exc}") from exc
        self._reader = _LineReader(self._proc.stdout)
        hello = self._read_message()
        if hello.get("ready") is not True:
            self.close()
            raise ProtocolError(f"bad handshake: {hello!r}")

    def estimate(self, image_current: Image, image_desired: Image) -> PoseVector:
        cur_path = self._workspace / "cur.ppm"
        des_path = self._workspace / "des.ppm"
        write_ppm(image_current, cur_path)
        write_ppm(image_desired, des_path)
        request = json.dumps(
            {"v": PROTOCOL_VERSION, "cur": str(cur_path), "des": str(des_path)}
        )
        try:
            self._proc.stdin.write(request.encode("ascii") + b"\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProcessDead(f"estimator stdin closed: {exc}") from exc
        msg = self._read_message()
        if "error" in msg:
            raise ProtocolError(f"estimator error reply: {msg['error']}")
        try:
            x = [float(c) for c in msg["x"]]
            q = [float(c) for c in msg["q"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed estimate: {msg!r}") from exc
        if len(x) != 3 or len(q) != 4 or not all(
            np.isfinite(c) for c in x + q
        ):
            raise ProtocolError(f"malformed estimate: {msg!r}")
        try:
            quat = canonicalize(q)
        except ZeroQuaternionError as exc:
            raise ProtocolError(f"zero quaternion in estimate: {msg!r}") from exc
        return PoseVector(np.array(x), quat)

    def _read_message(self) -> dict:
        line = self._reader.get(self._timeout)
        if line is None:
            if self._proc.poll() is not None:
                raise ProcessDead(
                    f"estimator exited with code {self._proc.returncode}"
                )
            raise EstimatorTimeout(
                f"no estimator response within {self._timeout} s"
            )
        if line is _LineReader._EOF:
            raise ProcessDead("estimator closed its stdout")
        try:
            msg = json.loads(line.decode("utf-8", errors="replace"))
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"unparseable line from estimator: {line!r}") from exc
        if not isinstance(msg, dict) or msg.get("v") != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol message: {msg!r}")
        return msg

    def close(self):
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
            except OSError:
                pass
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2.0)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        if self._own_workspace:
            shutil.rmtree(self._workspace, ignore_errors=True)

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()
