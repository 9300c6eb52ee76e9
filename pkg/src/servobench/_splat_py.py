"""Pure-Python z-buffer splat kernel.

Fallback for the compiled ``_splat`` extension.  The projection arithmetic
mirrors the compiled kernel expression for expression (and the extension is
built with FP contraction off), so both produce bit-identical images.
"""

import math


def _round_half_away(x):
    # round half away from zero, the documented pixel rounding rule
    if x >= 0.0:
        return math.floor(x + 0.5)
    return math.ceil(x - 0.5)


def fill_splats(positions, colors, rot_w2c, cam_t, fx, fy, cx, cy,
                near, radius, pixels, zbuf):
    h, w = zbuf.shape
    r00, r01, r02 = float(rot_w2c[0, 0]), float(rot_w2c[0, 1]), float(rot_w2c[0, 2])
    r10, r11, r12 = float(rot_w2c[1, 0]), float(rot_w2c[1, 1]), float(rot_w2c[1, 2])
    r20, r21, r22 = float(rot_w2c[2, 0]), float(rot_w2c[2, 1]), float(rot_w2c[2, 2])
    tx, ty, tz = float(cam_t[0]), float(cam_t[1]), float(cam_t[2])
    for i in range(positions.shape[0]):
        dx = float(positions[i, 0]) - tx
        dy = float(positions[i, 1]) - ty
        dz = float(positions[i, 2]) - tz
        px = r00 * dx + r01 * dy + r02 * dz
        py = r10 * dx + r11 * dy + r12 * dz
        pz = r20 * dx + r21 * dy + r22 * dz
        if pz <= near:
            continue
        u = fx * px / pz + cx
        v = fy * py / pz + cy
        if u < -1e9 or u > 1e9 or v < -1e9 or v > 1e9:
            continue
        cu = int(_round_half_away(u))
        cv = int(_round_half_away(v))
        if cu + radius < 0 or cu - radius >= w or cv + radius < 0 or cv - radius >= h:
            continue
        y0, y1 = max(cv - radius, 0), min(cv + radius + 1, h)
        x0, x1 = max(cu - radius, 0), min(cu + radius + 1, w)
        patch_z = zbuf[y0:y1, x0:x1]
        mask = pz < patch_z
        if mask.any():
            patch_z[mask] = pz
            pixels[y0:y1, x0:x1][mask] = colors[i]
