# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled traversal kernel.

Mirrors pykernel.py operation for operation: every float32 step there is one
C float operation here, compiled with fp-contract off, so positions agree
bit for bit between the two backends.  See pykernel.py for the algorithm
documentation; this file intentionally adds nothing beyond speed.
"""

from libc.math cimport INFINITY, fabs, pow, sqrt, ldexp

import numpy as np

from .result import EntryState, RayResult

BACKEND = "compiled"

cdef unsigned int NONE_U32 = 0xFFFFFFFFU
cdef int DEPTH_MASK = 0x1F


ctypedef struct EntryC:
    long long cell
    int depth
    long long i[3]
    float p[3]
    float q[3]
    double p0[3]
    int entry_axis
    double e0_local
    double e0_world
    double width


ctypedef struct ResC:
    float rgb[3]
    float T
    long long n
    double L
    double sum_w
    double endpoint[3]
    int plane_axis
    int plane_depth
    long long plane_j
    bint aborted
    bint exited


cdef inline float fclampf(float v, float lo, float hi) nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef class Kernel:
    cdef const unsigned int[::1] parent
    cdef const unsigned int[::1] first_child
    cdef const unsigned char[::1] depth_flags
    cdef const float[:, ::1] rgba
    cdef const unsigned int[:, ::1] neighbor3
    cdef int R
    cdef double S
    cdef double half

    def __init__(self, parent, first_child, depth_flags, rgba, neighbor3,
                 root_count_per_axis, root_size):
        self.parent = parent
        self.first_child = first_child
        self.depth_flags = depth_flags
        self.rgba = rgba
        self.neighbor3 = neighbor3
        self.R = int(root_count_per_axis)
        self.S = float(root_size)
        self.half = 0.5 * self.R * self.S

    @classmethod
    def for_canvas(cls, canvas):
        return cls(canvas.parent, canvas.first_child, canvas.depth_flags,
                   canvas.rgba, canvas.neighbor3,
                   canvas.config.root_count_per_axis, canvas.config.root_size)

    # -- entry -----------------------------------------------------------------

    cdef bint _c_ray_entry(self, double ex, double ey, double ez,
                           float dx, float dy, float dz, EntryC* out) nogil:
        cdef double half = self.half
        cdef double S = self.S
        cdef int R = self.R
        cdef double eye[3]
        cdef double d[3]
        cdef double p0[3]
        cdef double tmin, tmax, t1, t2, lo, hi
        cdef int a, entry_axis
        cdef bint inside
        eye[0] = ex; eye[1] = ey; eye[2] = ez
        d[0] = <double>dx; d[1] = <double>dy; d[2] = <double>dz
        inside = (fabs(ex) <= half) and (fabs(ey) <= half) and (fabs(ez) <= half)
        entry_axis = -1
        if inside:
            p0[0] = ex; p0[1] = ey; p0[2] = ez
        else:
            tmin = -INFINITY
            tmax = INFINITY
            for a in range(3):
                if d[a] == 0.0:
                    if fabs(eye[a]) > half:
                        return False
                    continue
                t1 = (-half - eye[a]) / d[a]
                t2 = (half - eye[a]) / d[a]
                if t1 <= t2:
                    lo = t1; hi = t2
                else:
                    lo = t2; hi = t1
                if lo > tmin:
                    tmin = lo
                    entry_axis = a
                if hi < tmax:
                    tmax = hi
            if tmin > tmax or tmax < 0.0 or tmin < 0.0:
                return False
            for a in range(3):
                p0[a] = eye[a] + tmin * d[a]
                if p0[a] < -half:
                    p0[a] = -half
                if p0[a] > half:
                    p0[a] = half

        # leaf descent in double precision, direction tie-break
        cdef long long g[3]
        cdef long long i[3]
        cdef double center[3]
        cdef double w = S
        cdef long long cell
        cdef unsigned int fc
        cdef int depth = 0
        cdef int slot, b
        for a in range(3):
            g[a] = <long long>((p0[a] + half) / S)
            if g[a] < 0:
                g[a] = 0
            if g[a] > R - 1:
                g[a] = R - 1
            center[a] = -half + (<double>g[a] + 0.5) * S
            i[a] = g[a]
        cell = g[0] + R * (g[1] + R * g[2])
        fc = self.first_child[cell]
        while fc != NONE_U32:
            w *= 0.5
            depth += 1
            slot = 0
            for a in range(3):
                if p0[a] > center[a]:
                    b = 1
                elif p0[a] < center[a]:
                    b = 0
                else:
                    b = 1 if d[a] > 0 else 0
                slot |= b << a
                center[a] += (0.5 if b else -0.5) * w
                i[a] = (i[a] << 1) | b
            cell = <long long>fc + slot
            fc = self.first_child[cell]

        cdef double p_local[3]
        cdef float p32[3]
        cdef float q32[3]
        cdef double e0l = 0.0
        cdef double e0w = 0.0
        cdef double diff
        for a in range(3):
            p_local[a] = (p0[a] - center[a]) / w
            p32[a] = <float>p_local[a]
            q32[a] = <float>p0[a]
        if entry_axis >= 0:
            p32[entry_axis] = <float>-0.5 if d[entry_axis] > 0 else <float>0.5
            q32[entry_axis] = <float>(-half) if d[entry_axis] > 0 else <float>half
        for a in range(3):
            p32[a] = fclampf(p32[a], <float>-0.5, <float>0.5)
            diff = <double>p32[a] - p_local[a]
            e0l += diff * diff
            diff = <double>q32[a] - p0[a]
            e0w += diff * diff
        out.cell = cell
        out.depth = depth
        for a in range(3):
            out.i[a] = i[a]
            out.p[a] = p32[a]
            out.q[a] = q32[a]
            out.p0[a] = p0[a]
        out.entry_axis = entry_axis
        out.e0_local = sqrt(e0l)
        out.e0_world = sqrt(e0w)
        out.width = w
        return True

    def ray_entry(self, eye, d32):
        cdef EntryC e
        if not self._c_ray_entry(float(eye[0]), float(eye[1]), float(eye[2]),
                                 np.float32(d32[0]), np.float32(d32[1]),
                                 np.float32(d32[2]), &e):
            return None
        return EntryState(
            cell=int(e.cell), depth=int(e.depth),
            i=(e.i[0], e.i[1], e.i[2]),
            p=(np.float32(e.p[0]), np.float32(e.p[1]), np.float32(e.p[2])),
            e0_local=e.e0_local, width=e.width,
            p0=(e.p0[0], e.p0[1], e.p0[2]), entry_axis=e.entry_axis,
            q=(np.float32(e.q[0]), np.float32(e.q[1]), np.float32(e.q[2])),
            e0_world=e.e0_world,
        )

    # -- topology ----------------------------------------------------------------

    cdef inline bint _c_face_step(self, long long cell, int depth, long long* i,
                                  int axis, int dirn,
                                  long long* ncell, int* ndepth,
                                  long long* ni) nogil:
        cdef long long j = i[axis] + dirn
        cdef int a, b, sh
        cdef unsigned int nc
        if j < 0 or j >= (<long long>self.R << depth):
            return False
        if depth == 0:
            for a in range(3):
                ni[a] = i[a]
            ni[axis] = j
            ncell[0] = ni[0] + self.R * (ni[1] + self.R * ni[2])
            ndepth[0] = 0
            return True
        b = <int>(i[axis] & 1)
        if (dirn > 0 and b == 0) or (dirn < 0 and b == 1):
            for a in range(3):
                ni[a] = i[a]
            ni[axis] = j
            ncell[0] = cell + dirn * (1 << axis)
            ndepth[0] = depth
            return True
        nc = self.neighbor3[cell, axis]
        if nc == NONE_U32:
            return False
        ndepth[0] = <int>(self.depth_flags[nc] & DEPTH_MASK)
        sh = depth - ndepth[0]
        for a in range(3):
            ni[a] = i[a] >> sh
        ni[axis] = j >> sh
        ncell[0] = <long long>nc
        return True

    # -- traversal -----------------------------------------------------------------

    cdef void _c_traverse_local(self, EntryC* entry, float dx, float dy, float dz,
                                float term, long long max_steps, ResC* out,
                                long long* path_buf, long long path_cap,
                                long long* path_len) nogil:
        cdef double S = self.S
        cdef double half = self.half
        cdef float d[3]
        cdef float dsign[3]
        cdef float p[3]
        cdef float rgb[3]
        cdef float T = <float>1.0
        cdef float t, ta, alpha, ts, k, s, c_a, v
        cdef long long cell = entry.cell
        cdef int depth = entry.depth
        cdef long long i[3]
        cdef long long ni[3]
        cdef long long ncell
        cdef int ndepth, a, axis, dirn, delta, b, slot
        cdef long long n = 0
        cdef double L = 0.0
        cdef double sum_w = 0.0
        cdef double w_cell, w_final
        cdef bint aborted = False
        cdef bint exited = False
        cdef unsigned int fc
        d[0] = dx; d[1] = dy; d[2] = dz
        for a in range(3):
            dsign[a] = <float>0.5 if d[a] > 0 else <float>-0.5
            p[a] = entry.p[a]
            i[a] = entry.i[a]
            rgb[a] = <float>0.0
        out.plane_axis = -1
        out.plane_depth = 0
        out.plane_j = 0
        path_len[0] = 0
        while True:
            if n >= max_steps:
                aborted = True
                break
            w_cell = S / <double>(1LL << depth)
            t = INFINITY
            axis = -1
            for a in range(3):
                if d[a] != <float>0.0:
                    ta = (dsign[a] - p[a]) / d[a]
                    if ta < t:
                        t = ta
                        axis = a
            if axis < 0 or t < 0:
                aborted = True
                break
            alpha = self.rgba[cell, 3]
            if alpha > <float>0.0 and t > <float>0.0:
                ts = <float>pow(<double>(<float>1.0 - alpha), <double>t)
                k = T * (<float>1.0 - ts)
                rgb[0] = rgb[0] + k * self.rgba[cell, 0]
                rgb[1] = rgb[1] + k * self.rgba[cell, 1]
                rgb[2] = rgb[2] + k * self.rgba[cell, 2]
                T = T * ts
            n += 1
            L += <double>t * w_cell
            sum_w += w_cell
            dirn = 1 if d[axis] > 0 else -1
            out.plane_axis = axis
            out.plane_depth = depth
            out.plane_j = i[axis] + (1 if dirn > 0 else 0)
            if path_buf != NULL and path_len[0] < path_cap:
                path_buf[path_len[0]] = cell
                path_len[0] += 1
            for a in range(3):
                if a != axis:
                    v = p[a] + t * d[a]
                    p[a] = fclampf(v, <float>-0.5, <float>0.5)
            p[axis] = dsign[axis]
            if T < term:
                break
            if not self._c_face_step(cell, depth, i, axis, dirn, &ncell, &ndepth, ni):
                exited = True
                break
            delta = depth - ndepth
            if delta > 0:
                s = <float>ldexp(1.0, -delta)
                for a in range(3):
                    c_a = <float>((<double>(i[a] - (ni[a] << delta)) + 0.5)
                                  * ldexp(1.0, -delta) - 0.5)
                    p[a] = p[a] * s + c_a
                for a in range(3):
                    if a != axis:
                        p[a] = fclampf(p[a], <float>-0.5, <float>0.5)
            p[axis] = <float>-0.5 if dirn > 0 else <float>0.5
            cell = ncell
            depth = ndepth
            for a in range(3):
                i[a] = ni[a]
            fc = self.first_child[cell]
            while fc != NONE_U32:
                slot = 0
                for a in range(3):
                    if p[a] > <float>0.0:
                        b = 1
                    elif p[a] < <float>0.0:
                        b = 0
                    else:
                        b = 1 if d[a] > 0 else 0
                    slot |= b << a
                    p[a] = <float>2.0 * p[a] + (<float>-0.5 if b else <float>0.5)
                    i[a] = (i[a] << 1) | b
                depth += 1
                cell = <long long>fc + slot
                fc = self.first_child[cell]
        w_final = S / <double>(1LL << depth)
        for a in range(3):
            out.endpoint[a] = (-half + (<double>i[a] + 0.5) * w_final) \
                + <double>p[a] * w_final
            out.rgb[a] = rgb[a]
        out.T = T
        out.n = n
        out.L = L
        out.sum_w = sum_w
        out.aborted = aborted
        out.exited = exited

    cdef void _c_traverse_world(self, EntryC* entry, float dx, float dy, float dz,
                                float term, long long max_steps, ResC* out,
                                long long* path_buf, long long path_cap,
                                long long* path_len) nogil:
        cdef double S = self.S
        cdef double half = self.half
        cdef float d[3]
        cdef float q[3]
        cdef float lo[3]
        cdef float hi[3]
        cdef float rgb[3]
        cdef float T = <float>1.0
        cdef float t, ta, alpha, ts, k, v, lim, t_local, c_a
        cdef long long cell = entry.cell
        cdef int depth = entry.depth
        cdef long long i[3]
        cdef long long ni[3]
        cdef long long ncell
        cdef int ndepth, a, axis, dirn, b, slot
        cdef long long n = 0
        cdef double L = 0.0
        cdef double sum_w = 0.0
        cdef double w_cell, w_child
        cdef bint aborted = False
        cdef bint exited = False
        cdef unsigned int fc
        d[0] = dx; d[1] = dy; d[2] = dz
        for a in range(3):
            q[a] = entry.q[a]
            i[a] = entry.i[a]
            rgb[a] = <float>0.0
        out.plane_axis = -1
        out.plane_depth = 0
        out.plane_j = 0
        path_len[0] = 0
        while True:
            if n >= max_steps:
                aborted = True
                break
            w_cell = S / <double>(1LL << depth)
            for a in range(3):
                lo[a] = <float>(-half + <double>i[a] * w_cell)
                hi[a] = <float>(-half + <double>(i[a] + 1) * w_cell)
            t = INFINITY
            axis = -1
            for a in range(3):
                if d[a] != <float>0.0:
                    lim = hi[a] if d[a] > 0 else lo[a]
                    ta = (lim - q[a]) / d[a]
                    if ta < t:
                        t = ta
                        axis = a
            if axis < 0 or t < 0:
                aborted = True
                break
            alpha = self.rgba[cell, 3]
            if alpha > <float>0.0 and t > <float>0.0:
                t_local = t / <float>w_cell
                ts = <float>pow(<double>(<float>1.0 - alpha), <double>t_local)
                k = T * (<float>1.0 - ts)
                rgb[0] = rgb[0] + k * self.rgba[cell, 0]
                rgb[1] = rgb[1] + k * self.rgba[cell, 1]
                rgb[2] = rgb[2] + k * self.rgba[cell, 2]
                T = T * ts
            n += 1
            L += <double>t
            sum_w += w_cell
            dirn = 1 if d[axis] > 0 else -1
            out.plane_axis = axis
            out.plane_depth = depth
            out.plane_j = i[axis] + (1 if dirn > 0 else 0)
            if path_buf != NULL and path_len[0] < path_cap:
                path_buf[path_len[0]] = cell
                path_len[0] += 1
            for a in range(3):
                if a != axis:
                    v = q[a] + t * d[a]
                    q[a] = fclampf(v, lo[a], hi[a])
            q[axis] = hi[axis] if dirn > 0 else lo[axis]
            if T < term:
                break
            if not self._c_face_step(cell, depth, i, axis, dirn, &ncell, &ndepth, ni):
                exited = True
                break
            cell = ncell
            depth = ndepth
            for a in range(3):
                i[a] = ni[a]
            fc = self.first_child[cell]
            while fc != NONE_U32:
                w_child = S / <double>(1LL << (depth + 1))
                slot = 0
                for a in range(3):
                    c_a = <float>(-half + <double>(2 * i[a] + 1) * w_child)
                    if q[a] > c_a:
                        b = 1
                    elif q[a] < c_a:
                        b = 0
                    else:
                        b = 1 if d[a] > 0 else 0
                    slot |= b << a
                    i[a] = (i[a] << 1) | b
                depth += 1
                cell = <long long>fc + slot
                fc = self.first_child[cell]
        for a in range(3):
            out.endpoint[a] = <double>q[a]
            out.rgb[a] = rgb[a]
        out.T = T
        out.n = n
        out.L = L
        out.sum_w = sum_w
        out.aborted = aborted
        out.exited = exited

    def traverse(self, entry, d32, term_t=0.003, max_steps=1_000_000,
                 record=False, world=False):
        cdef EntryC e
        cdef ResC r
        cdef int a
        e.cell = entry.cell
        e.depth = entry.depth
        for a in range(3):
            e.i[a] = entry.i[a]
            e.p[a] = np.float32(entry.p[a])
            e.q[a] = np.float32(entry.q[a])
            e.p0[a] = entry.p0[a]
        e.entry_axis = entry.entry_axis
        cdef float dx = np.float32(d32[0])
        cdef float dy = np.float32(d32[1])
        cdef float dz = np.float32(d32[2])
        cdef float term = np.float32(term_t)
        cdef long long cap = 0
        cdef long long plen = 0
        cdef long long[::1] buf = None
        cdef long long* bufp = NULL
        path_arr = None
        if record:
            cap = min(int(max_steps), 1 << 21)
            path_arr = np.empty(cap, dtype=np.int64)
            buf = path_arr
            bufp = &buf[0]
        if world:
            self._c_traverse_world(&e, dx, dy, dz, term, max_steps, &r,
                                   bufp, cap, &plen)
        else:
            self._c_traverse_local(&e, dx, dy, dz, term, max_steps, &r,
                                   bufp, cap, &plen)
        plane = None
        if r.plane_axis >= 0:
            plane = (r.plane_axis, r.plane_depth, int(r.plane_j))
        path = path_arr[:plen].tolist() if record else None
        return RayResult(
            rgb=(float(r.rgb[0]), float(r.rgb[1]), float(r.rgb[2])),
            transmittance=float(r.T), n=int(r.n), length=r.L, sum_width=r.sum_w,
            endpoint=(r.endpoint[0], r.endpoint[1], r.endpoint[2]),
            plane=plane, aborted=bool(r.aborted), exited=bool(r.exited),
            path=path,
        )

    # -- full-frame rendering ------------------------------------------------------

    def render_rows(self, cam, img, y0, y1, term_t=0.003, max_steps=1_000_000):
        cdef float[:, :, ::1] out = img
        cdef double ex = cam["eye"][0]
        cdef double ey = cam["eye"][1]
        cdef double ez = cam["eye"][2]
        cdef double rx = cam["right"][0], ry = cam["right"][1], rz = cam["right"][2]
        cdef double ux = cam["up"][0], uy = cam["up"][1], uz = cam["up"][2]
        cdef double fx = cam["forward"][0], fy = cam["forward"][1], fz = cam["forward"][2]
        cdef double th = cam["tan_half_fov"]
        cdef int W = cam["width"]
        cdef int H = cam["height"]
        cdef float bg_r = np.float32(cam["background"][0])
        cdef float bg_g = np.float32(cam["background"][1])
        cdef float bg_b = np.float32(cam["background"][2])
        cdef float bg_a = np.float32(cam["background"][3])
        cdef float term = np.float32(term_t)
        cdef long long msteps = int(max_steps)
        cdef int ys = int(y0), ye = int(y1)
        cdef int px, py
        cdef double u, v, ddx, ddy, ddz, norm, aspect
        cdef float dx, dy, dz, T
        cdef EntryC e
        cdef ResC r
        cdef long long plen = 0
        aspect = <double>W / <double>H
        with nogil:
            for py in range(ys, ye):
                for px in range(W):
                    u = (<double>px + 0.5) / W * 2.0 - 1.0
                    v = 1.0 - (<double>py + 0.5) / H * 2.0
                    ddx = fx + th * (u * aspect * rx + v * ux)
                    ddy = fy + th * (u * aspect * ry + v * uy)
                    ddz = fz + th * (u * aspect * rz + v * uz)
                    norm = sqrt(ddx * ddx + ddy * ddy + ddz * ddz)
                    dx = <float>(ddx / norm)
                    dy = <float>(ddy / norm)
                    dz = <float>(ddz / norm)
                    if not self._c_ray_entry(ex, ey, ez, dx, dy, dz, &e):
                        out[py, px, 0] = bg_r
                        out[py, px, 1] = bg_g
                        out[py, px, 2] = bg_b
                        out[py, px, 3] = bg_a
                        continue
                    self._c_traverse_local(&e, dx, dy, dz, term, msteps, &r,
                                           NULL, 0, &plen)
                    T = r.T
                    out[py, px, 0] = r.rgb[0] + T * bg_r
                    out[py, px, 1] = r.rgb[1] + T * bg_g
                    out[py, px, 2] = r.rgb[2] + T * bg_b
                    out[py, px, 3] = <float>1.0 - T * (<float>1.0 - bg_a)
