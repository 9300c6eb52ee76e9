"""Deterministic synthetic scenes and a pinhole point-splat renderer.

Scenes are colored 3-D points drawn from a named PRNG (xorshift64*, below)
so the exact same scene can be regenerated by any implementation from the
seed alone.  Rendering is a pure function of its inputs: splats are
z-buffered squares, pixel centers use round-half-away-from-zero, and the
output is bit-identical across runs, platforms, and render backends.

The inner loop lives in the compiled ``_splat`` extension when available
and in ``_splat_py`` otherwise; ``RENDER_BACKEND`` names the one in use.
Set ``SERVOBENCH_RENDER_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .pose_algebra import PoseSE3, inverse

if os.environ.get("SERVOBENCH_RENDER_BACKEND", "").lower() == "python":
    from . import _splat_py as _splat_impl

    RENDER_BACKEND = "python"
else:
    try:
        from . import _splat as _splat_impl  # type: ignore[no-redef]

        RENDER_BACKEND = "cython"
    except ImportError:
        from . import _splat_py as _splat_impl  # type: ignore[no-redef]

        RENDER_BACKEND = "python"

BACKGROUND_RGB = (16, 16, 16)
NEAR_PLANE = 0.05  # meters


class XorShift64Star:
    """xorshift64* PRNG, the versioned scene generator (v1).

    64-bit state; a zero seed maps to 0x9E3779B97F4A7C15.  Step:
    ``x ^= x >> 12; x ^= x << 25; x ^= x >> 27`` (mod 2^64), output
    ``x * 0x2545F4914F6CDD1D`` (mod 2^64).  Doubles take the top 53 bits
    of the output; bytes take the top 8.
    """

    _MASK = 0xFFFFFFFFFFFFFFFF
    _MULT = 0x2545F4914F6CDD1D

    def __init__(self, seed: int):
        s = seed & self._MASK
        self._state = s if s != 0 else 0x9E3779B97F4A7C15

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x = (x ^ (x << 25)) & self._MASK
        x ^= x >> 27
        self._state = x
        return (x * self._MULT) & self._MASK

    def next_double(self) -> float:
        # uniform in [0, 1)
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def next_byte(self) -> int:
        return self.next_u64() >> 56


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


DEFAULT_INTRINSICS = CameraIntrinsics(fx=60.0, fy=60.0, cx=32.0, cy=24.0,
                                      width=64, height=48)


@dataclass(frozen=True, eq=False)
class PointScene:
    """Colored 3-D points; positions meters, colors 8-bit RGB."""

    positions: np.ndarray
    colors: np.ndarray
    seed: int
    extent: float

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        col = np.ascontiguousarray(self.colors, dtype=np.uint8)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] == 0:
            raise ValueError("positions must be a non-empty (n, 3) array")
        if col.shape != pos.shape:
            raise ValueError("colors must match positions, one RGB per point")
        if not np.all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        pos.setflags(write=False)
        col.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)


@dataclass(frozen=True, eq=False)
class Image:
    """Row-major RGB image, 8 bits per channel."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self):
        if len(self.pixels) != self.width * self.height * 3:
            raise ValueError(
                f"pixel buffer has {len(self.pixels)} bytes, "
                f"expected {self.width * self.height * 3}"
            )

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(
            self.height, self.width, 3
        )


def generate_scene(seed: int, n_points: int, extent: float) -> PointScene:
    """Points uniform in a cube of side ``extent`` centered at the origin.

    Draw order per point: x, y, z as doubles mapped to
    ``(d - 0.5) * extent``, then r, g, b each as ``32 + byte % 224``
    (colors never collide with the background).
    """
    if n_points < 1:
        raise ValueError("n_points must be >= 1")
    if extent <= 0:
        raise ValueError("extent must be positive")
    rng = XorShift64Star(seed)
    positions = np.empty((n_points, 3))
    colors = np.empty((n_points, 3), dtype=np.uint8)
    for i in range(n_points):
        for j in range(3):
            positions[i, j] = (rng.next_double() - 0.5) * extent
        for j in range(3):
            colors[i, j] = 32 + rng.next_byte() % 224
    return PointScene(positions, colors, seed, float(extent))


def project(point, camera_pose: PoseSE3,
            k: CameraIntrinsics) -> Optional[Tuple[float, float, float]]:
    """Project a world point; None when at or behind the near plane."""
    p_cam = inverse(camera_pose).apply(point)
    z = float(p_cam[2])
    if z <= NEAR_PLANE:
        return None
    u = k.fx * float(p_cam[0]) / z + k.cx
    v = k.fy * float(p_cam[1]) / z + k.cy
    return (u, v, z)


def render(scene: PointScene, camera_pose: PoseSE3, k: CameraIntrinsics,
           splat_radius: int = 1) -> Image:
    """Render z-buffered square splats of side ``2 * splat_radius + 1``."""
    if splat_radius < 0:
        raise ValueError("splat_radius must be >= 0")
    pixels = np.empty((k.height, k.width, 3), dtype=np.uint8)
    pixels[:, :] = BACKGROUND_RGB
    zbuf = np.full((k.height, k.width), np.inf)
    rot_w2c = np.ascontiguousarray(camera_pose.rotation.conjugate().rotation_matrix())
    cam_t = np.ascontiguousarray(camera_pose.translation)
    _splat_impl.fill_splats(
        scene.positions, scene.colors, rot_w2c, cam_t,
        float(k.fx), float(k.fy), float(k.cx), float(k.cy),
        NEAR_PLANE, int(splat_radius), pixels, zbuf,
    )
    return Image(k.width, k.height, pixels.tobytes())


def ppm_bytes(image: Image) -> bytes:
    """Binary PPM (P6, maxval 255), bit-exact layout."""
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels


def write_ppm(image: Image, path) -> None:
    with open(path, "wb") as f:
        f.write(ppm_bytes(image))
