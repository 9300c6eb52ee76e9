# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled z-buffer splat kernel; mirrors ``_splat_py`` bit for bit."""

from libc.math cimport ceil, floor


cdef inline double _round_half_away(double x) noexcept nogil:
    if x >= 0.0:
        return floor(x + 0.5)
    return ceil(x - 0.5)


def fill_splats(const double[:, ::1] positions,
                const unsigned char[:, ::1] colors,
                const double[:, ::1] rot_w2c,
                const double[::1] cam_t,
                double fx, double fy, double cx, double cy,
                double near, Py_ssize_t radius,
                unsigned char[:, :, ::1] pixels,
                double[:, ::1] zbuf):
    cdef Py_ssize_t n = positions.shape[0]
    cdef Py_ssize_t h = zbuf.shape[0]
    cdef Py_ssize_t w = zbuf.shape[1]
    cdef Py_ssize_t i, ix, iy, du, dv, cu, cv
    cdef double dx, dy, dz, px, py, pz, u, v
    cdef double r00 = rot_w2c[0, 0], r01 = rot_w2c[0, 1], r02 = rot_w2c[0, 2]
    cdef double r10 = rot_w2c[1, 0], r11 = rot_w2c[1, 1], r12 = rot_w2c[1, 2]
    cdef double r20 = rot_w2c[2, 0], r21 = rot_w2c[2, 1], r22 = rot_w2c[2, 2]
    cdef double tx = cam_t[0], ty = cam_t[1], tz = cam_t[2]
    cdef unsigned char cr, cg, cb

    for i in range(n):
        dx = positions[i, 0] - tx
        dy = positions[i, 1] - ty
        dz = positions[i, 2] - tz
        px = r00 * dx + r01 * dy + r02 * dz
        py = r10 * dx + r11 * dy + r12 * dz
        pz = r20 * dx + r21 * dy + r22 * dz
        if pz <= near:
            continue
        u = fx * px / pz + cx
        v = fy * py / pz + cy
        if u < -1e9 or u > 1e9 or v < -1e9 or v > 1e9:
            continue
        cu = <Py_ssize_t>_round_half_away(u)
        cv = <Py_ssize_t>_round_half_away(v)
        if cu + radius < 0 or cu - radius >= w or cv + radius < 0 or cv - radius >= h:
            continue
        cr = colors[i, 0]
        cg = colors[i, 1]
        cb = colors[i, 2]
        for dv in range(-radius, radius + 1):
            iy = cv + dv
            if iy < 0 or iy >= h:
                continue
            for du in range(-radius, radius + 1):
                ix = cu + du
                if ix < 0 or ix >= w:
                    continue
                if pz < zbuf[iy, ix]:
                    zbuf[iy, ix] = pz
                    pixels[iy, ix, 0] = cr
                    pixels[iy, ix, 1] = cg
                    pixels[iy, ix, 2] = cb
