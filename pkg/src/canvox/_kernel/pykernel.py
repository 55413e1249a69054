"""Pure-Python traversal kernel with exact float32 semantics.

This is the reference implementation of the ray caster.  Every
single-precision operation is written as one explicit ``np.float32``
arithmetic step, so the compiled kernel (built with fp-contract off) produces
bit-identical positions.  Traversal runs in cell-local coordinates: the
current cell's frame has origin at its center and size one, the direction is
fixed in float32 for the whole ray, and frame changes between cells are
dyadic scale/shift pairs.

Key invariants:
  - exit coordinate snaps to +-0.5 exactly after every crossing
  - equal-depth transitions are error-free (a sign flip of the exit axis)
  - the double-precision state (path length, endpoint reconstruction) never
    feeds back into the float32 state
"""

from __future__ import annotations

import math

import numpy as np

from .result import EntryState, RayResult

NONE = 0xFFFFFFFF
DEPTH_MASK = 0x1F

F = np.float32
_HALF = F(0.5)
_NEGHALF = F(-0.5)
_ONE = F(1.0)
_TWO = F(2.0)
_ZERO = F(0.0)
_TERM = F(0.003)
_INF = F(np.inf)

BACKEND = "python"


class Kernel:
    """Traversal over one canvas snapshot (pools must not mutate meanwhile)."""

    def __init__(self, parent, first_child, depth_flags, rgba, neighbor3,
                 root_count_per_axis: int, root_size: float):
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

    # -- entry ---------------------------------------------------------------

    def ray_entry(self, eye, d32):
        """Double-precision entry: AABB clip, leaf descent, float32 rounding.

        ``eye`` is a double 3-tuple, ``d32`` the float32 unit direction.
        Returns EntryState or None when the ray misses the canvas.
        """
        half, S, R = self.half, self.S, self.R
        d = tuple(float(v) for v in d32)
        inside = all(abs(e) <= half for e in eye)
        entry_axis = -1
        if inside:
            p0 = tuple(float(e) for e in eye)
        else:
            tmin, tmax = -math.inf, math.inf
            for a in range(3):
                if d[a] == 0.0:
                    if abs(eye[a]) > half:
                        return None
                    continue
                t1 = (-half - eye[a]) / d[a]
                t2 = (half - eye[a]) / d[a]
                lo, hi = (t1, t2) if t1 <= t2 else (t2, t1)
                if lo > tmin:
                    tmin, entry_axis = lo, a
                tmax = min(tmax, hi)
            if tmin > tmax or tmax < 0.0 or tmin < 0.0:
                return None
            p0 = tuple(
                min(max(eye[a] + tmin * d[a], -half), half) for a in range(3)
            )
        cell, depth, i, center, w = self._descend_to_leaf(p0, d)
        p_local = [(p0[a] - center[a]) / w for a in range(3)]
        p32 = [F(v) for v in p_local]
        q32 = [F(v) for v in p0]
        if entry_axis >= 0:
            p32[entry_axis] = _NEGHALF if d[entry_axis] > 0 else _HALF
            q32[entry_axis] = F(-half) if d[entry_axis] > 0 else F(half)
        for a in range(3):
            p32[a] = min(max(p32[a], _NEGHALF), _HALF)
        e0_local = 0.0
        e0_world = 0.0
        for a in range(3):
            dp = float(p32[a]) - p_local[a]
            e0_local += dp * dp
            dq = float(q32[a]) - p0[a]
            e0_world += dq * dq
        e0_local = math.sqrt(e0_local)
        e0_world = math.sqrt(e0_world)
        return EntryState(cell=cell, depth=depth, i=tuple(i), p=tuple(p32),
                          e0_local=e0_local, width=w, p0=p0,
                          entry_axis=entry_axis, q=tuple(q32), e0_world=e0_world)

    def _descend_to_leaf(self, p0, d):
        half, S, R = self.half, self.S, self.R
        g = [min(max(int((p0[a] + half) / S), 0), R - 1) for a in range(3)]
        cell = g[0] + R * (g[1] + R * g[2])
        center = [-half + (g[a] + 0.5) * S for a in range(3)]
        i = list(g)
        w = S
        depth = 0
        fc = int(self.first_child[cell])
        while fc != NONE:
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
            cell = fc + slot
            fc = int(self.first_child[cell])
        return cell, depth, i, center, w

    # -- topology ------------------------------------------------------------

    def _face_neighbor_step(self, cell, depth, i, axis, dirn):
        """(ncell, ndepth, ni) across a face, or None at the canvas boundary."""
        j = i[axis] + dirn
        if j < 0 or j >= (self.R << depth):
            return None
        if depth == 0:
            g = list(i)
            g[axis] = j
            ncell = g[0] + self.R * (g[1] + self.R * g[2])
            return ncell, 0, g
        b = i[axis] & 1
        if (dirn > 0 and b == 0) or (dirn < 0 and b == 1):
            ni = list(i)
            ni[axis] = j
            return cell + dirn * (1 << axis), depth, ni
        ncell = int(self.neighbor3[cell, axis])
        if ncell == NONE:
            return None
        ndepth = int(self.depth_flags[ncell]) & DEPTH_MASK
        sh = depth - ndepth
        ni = [v >> sh for v in i]
        ni[axis] = j >> sh
        return ncell, ndepth, ni

    # -- traversal -----------------------------------------------------------

    def traverse(self, entry: EntryState, d32, term_t: float = 0.003,
                 max_steps: int = 1_000_000, record: bool = False,
                 world: bool = False, state_log: list | None = None) -> RayResult:
        if world:
            return self._traverse_world(entry, d32, term_t, max_steps, record)
        return self._traverse_local(entry, d32, term_t, max_steps, record,
                                    state_log)

    def _traverse_local(self, entry, d32, term_t, max_steps, record,
                        state_log=None):
        S, R, half = self.S, self.R, self.half
        first_child = self.first_child
        rgba = self.rgba
        term = F(term_t)
        d = tuple(F(v) for v in d32)
        dsign = [_HALF if v > 0 else _NEGHALF for v in d]
        cell, depth = entry.cell, entry.depth
        i = list(entry.i)
        p = [F(v) for v in entry.p]
        T = _ONE
        rgb = [_ZERO, _ZERO, _ZERO]
        n = 0
        L = 0.0
        sum_w = 0.0
        plane = None
        aborted = False
        exited = False
        path = [] if record else None
        while True:
            if n >= max_steps:
                aborted = True
                break
            w_cell = S / float(1 << depth)
            t = _INF
            axis = -1
            for a in range(3):
                da = d[a]
                if da != _ZERO:
                    ta = (dsign[a] - p[a]) / da
                    if ta < t:
                        t = ta
                        axis = a
            if axis < 0 or t < 0:
                aborted = True
                break
            alpha = rgba[cell, 3]
            if alpha > _ZERO and t > _ZERO:
                ts = F(math.pow(float(_ONE - alpha), float(t)))
                k = T * (_ONE - ts)
                rgb[0] = rgb[0] + k * rgba[cell, 0]
                rgb[1] = rgb[1] + k * rgba[cell, 1]
                rgb[2] = rgb[2] + k * rgba[cell, 2]
                T = T * ts
            n += 1
            L += float(t) * w_cell
            sum_w += w_cell
            dirn = 1 if d[axis] > 0 else -1
            plane = (axis, depth, i[axis] + (1 if dirn > 0 else 0))
            if record:
                path.append(cell)
            for a in range(3):
                if a != axis:
                    v = p[a] + t * d[a]
                    p[a] = min(max(v, _NEGHALF), _HALF)
            p[axis] = dsign[axis]
            if state_log is not None:
                state_log.append(("exit", cell, depth, tuple(i), tuple(p)))
            if T < term:
                break
            step = self._face_neighbor_step(cell, depth, i, axis, dirn)
            if step is None:
                exited = True
                break
            ncell, ndepth, ni = step
            delta = depth - ndepth
            if delta > 0:
                s = F(2.0 ** -delta)
                for a in range(3):
                    c_a = F((i[a] - (ni[a] << delta) + 0.5) * (2.0 ** -delta) - 0.5)
                    p[a] = p[a] * s + c_a
                for a in range(3):
                    if a != axis:
                        p[a] = min(max(p[a], _NEGHALF), _HALF)
            p[axis] = _NEGHALF if dirn > 0 else _HALF
            cell, depth, i = ncell, ndepth, ni
            fc = int(first_child[cell])
            while fc != NONE:
                slot = 0
                for a in range(3):
                    if p[a] > _ZERO:
                        b = 1
                    elif p[a] < _ZERO:
                        b = 0
                    else:
                        b = 1 if d[a] > 0 else 0
                    slot |= b << a
                    p[a] = _TWO * p[a] + (_NEGHALF if b else _HALF)
                    i[a] = (i[a] << 1) | b
                depth += 1
                cell = fc + slot
                fc = int(first_child[cell])
            if state_log is not None:
                state_log.append(("enter", cell, depth, tuple(i), tuple(p)))
        w_final = S / float(1 << depth)
        endpoint = tuple(
            (-half + (i[a] + 0.5) * w_final) + float(p[a]) * w_final
            for a in range(3)
        )
        return RayResult(rgb=tuple(float(v) for v in rgb), transmittance=float(T),
                         n=n, length=L, sum_width=sum_w, endpoint=endpoint,
                         plane=plane, aborted=aborted, exited=exited, path=path)

    def _traverse_world(self, entry, d32, term_t, max_steps, record):
        """Drift baseline: identical algorithm, position in float32 world."""
        S, R, half = self.S, self.R, self.half
        first_child = self.first_child
        rgba = self.rgba
        term = F(term_t)
        d = tuple(F(v) for v in d32)
        cell, depth = entry.cell, entry.depth
        i = list(entry.i)
        q = [F(v) for v in entry.q]
        T = _ONE
        rgb = [_ZERO, _ZERO, _ZERO]
        n = 0
        L = 0.0
        sum_w = 0.0
        plane = None
        aborted = False
        exited = False
        path = [] if record else None
        while True:
            if n >= max_steps:
                aborted = True
                break
            w_cell = S / float(1 << depth)
            lo = [F(-half + i[a] * w_cell) for a in range(3)]
            hi = [F(-half + (i[a] + 1) * w_cell) for a in range(3)]
            t = _INF
            axis = -1
            for a in range(3):
                da = d[a]
                if da != _ZERO:
                    lim = hi[a] if da > 0 else lo[a]
                    ta = (lim - q[a]) / da
                    if ta < t:
                        t = ta
                        axis = a
            if axis < 0 or t < 0:
                aborted = True
                break
            alpha = rgba[cell, 3]
            if alpha > _ZERO and t > _ZERO:
                t_local = t / F(w_cell)
                ts = F(math.pow(float(_ONE - alpha), float(t_local)))
                k = T * (_ONE - ts)
                rgb[0] = rgb[0] + k * rgba[cell, 0]
                rgb[1] = rgb[1] + k * rgba[cell, 1]
                rgb[2] = rgb[2] + k * rgba[cell, 2]
                T = T * ts
            n += 1
            L += float(t)
            sum_w += w_cell
            dirn = 1 if d[axis] > 0 else -1
            plane = (axis, depth, i[axis] + (1 if dirn > 0 else 0))
            if record:
                path.append(cell)
            for a in range(3):
                if a != axis:
                    v = q[a] + t * d[a]
                    q[a] = min(max(v, lo[a]), hi[a])
            q[axis] = hi[axis] if dirn > 0 else lo[axis]
            if T < term:
                break
            step = self._face_neighbor_step(cell, depth, i, axis, dirn)
            if step is None:
                exited = True
                break
            cell, depth, i = step
            fc = int(first_child[cell])
            while fc != NONE:
                w_child = S / float(1 << (depth + 1))
                slot = 0
                for a in range(3):
                    c_a = F(-half + (2 * i[a] + 1) * w_child)
                    if q[a] > c_a:
                        b = 1
                    elif q[a] < c_a:
                        b = 0
                    else:
                        b = 1 if d[a] > 0 else 0
                    slot |= b << a
                    i[a] = (i[a] << 1) | b
                depth += 1
                cell = fc + slot
                fc = int(first_child[cell])
        endpoint = tuple(float(v) for v in q)
        return RayResult(rgb=tuple(float(v) for v in rgb), transmittance=float(T),
                         n=n, length=L, sum_width=sum_w, endpoint=endpoint,
                         plane=plane, aborted=aborted, exited=exited, path=path)

    # -- full-frame rendering --------------------------------------------------

    def render_rows(self, cam, img, y0, y1, term_t=0.003, max_steps=1_000_000):
        """Fill image rows [y0, y1) with composited rgba pixels."""
        H, W = img.shape[:2]
        bg = cam["background"]
        bg_r, bg_g, bg_b, bg_a = (F(v) for v in bg)
        for py in range(y0, y1):
            for px in range(W):
                d64, d32 = pixel_direction(cam, px, py)
                entry = self.ray_entry(cam["eye"], d32)
                if entry is None:
                    img[py, px, 0] = bg_r
                    img[py, px, 1] = bg_g
                    img[py, px, 2] = bg_b
                    img[py, px, 3] = bg_a
                    continue
                res = self.traverse(entry, d32, term_t=term_t, max_steps=max_steps)
                T = F(res.transmittance)
                img[py, px, 0] = F(res.rgb[0]) + T * bg_r
                img[py, px, 1] = F(res.rgb[1]) + T * bg_g
                img[py, px, 2] = F(res.rgb[2]) + T * bg_b
                img[py, px, 3] = _ONE - T * (_ONE - bg_a)


def pixel_direction(cam, px, py):
    """Pinhole pixel ray: double-precision normalize, then float32 truncate."""
    W, H = cam["width"], cam["height"]
    u = (px + 0.5) / W * 2.0 - 1.0
    v = 1.0 - (py + 0.5) / H * 2.0
    th = cam["tan_half_fov"]
    aspect = W / H
    r, up, fw = cam["right"], cam["up"], cam["forward"]
    dx = fw[0] + th * (u * aspect * r[0] + v * up[0])
    dy = fw[1] + th * (u * aspect * r[1] + v * up[1])
    dz = fw[2] + th * (u * aspect * r[2] + v * up[2])
    norm = math.sqrt(dx * dx + dy * dy + dz * dz)
    d64 = (dx / norm, dy / norm, dz / norm)
    return d64, (F(d64[0]), F(d64[1]), F(d64[2]))
