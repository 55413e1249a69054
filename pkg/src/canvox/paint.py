"""Volumetric brush engine.

Strokes arrive as time-stamped samples, get sub-sampled to roughly 5 Hz,
and deposit volumetric stamps on the canvas.  Painting never changes tree
topology directly: stamps are applied to the leaves that exist right now,
while cells that should be finer or coarser are queued and adjusted one
level per frame under a budget (``process_adjustments``).

Stamp shapes are signed-distance functions that are 1-Lipschitz in the
Euclidean norm, which gives exact inside/outside fast paths against a
cell's bounding sphere.  Boundary cells estimate fractional coverage from
the SDF value at the eight octant centers.

Blending follows an additive opacity model: with brush (B, b_a) and canvas
(C, c_a), the mixed color is m*B + (1-m)*C with m = b_a / (b_a + c_a) and
output opacity b_a + c_a, clamped to 1 so colors stay renderable.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import PoolExhausted
from .octree import NONE, Canvas, CanvasConfig

SHAPES = ("sphere", "cylinder", "box", "cone", "perlin")
MODES = ("paint", "erase", "recolor")

# brush radius should span roughly this many voxels (adaptive depth rule)
VOXELS_PER_RADIUS = 10.0

RESAMPLE_INTERVAL_S = 0.2  # ~5 Hz
RESAMPLE_DISTANCE_RADII = 0.5

MERGE_TOLERANCE = 1.0 / 64.0

_SQRT3 = math.sqrt(3.0)


@dataclass
class Brush:
    shape: str = "sphere"
    radius: float = 1.0
    rgba: tuple = (1.0, 1.0, 1.0, 1.0)
    mode: str = "paint"
    pickup_strength: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if any(not (0.0 <= c <= 1.0) for c in self.rgba):
            raise ValueError("rgba channels must be in [0, 1]")
        if self.mode == "paint" and not (0.0 < self.rgba[3] <= 1.0):
            raise ValueError("paint mode needs brush alpha in (0, 1]")
        if not (0.0 <= self.pickup_strength <= 1.0):
            raise ValueError("pickup_strength must be in [0, 1]")


@dataclass
class StrokeSample:
    time: float
    position: tuple
    pressure: float = 1.0
    zoom: float = 1.0


@dataclass
class Room:
    """Named axis-aligned beacon region for viewing and detail limiting."""

    name: str
    box_min: tuple
    box_max: tuple
    suggested_scale: float = 1.0

    def __post_init__(self):
        if any(lo >= hi for lo, hi in zip(self.box_min, self.box_max)):
            raise ValueError("room box must be non-empty")

    @property
    def center(self):
        return tuple((a + b) / 2.0 for a, b in zip(self.box_min, self.box_max))

    @property
    def diameter(self) -> float:
        return math.dist(self.box_min, self.box_max)

    def contains(self, p) -> bool:
        return all(lo <= x <= hi for x, lo, hi in zip(p, self.box_min, self.box_max))

    def distance(self, p) -> float:
        d2 = 0.0
        for x, lo, hi in zip(p, self.box_min, self.box_max):
            if x < lo:
                d2 += (lo - x) ** 2
            elif x > hi:
                d2 += (x - hi) ** 2
        return math.sqrt(d2)


# ---------------------------------------------------------------------------
# color blending


def blend_color(brush_rgba, canvas_rgba):
    """Additive opacity mix; returns the new canvas rgba."""
    ba, ca = brush_rgba[3], canvas_rgba[3]
    tot = ba + ca
    if tot <= 0.0:
        return tuple(canvas_rgba)
    m = ba / tot
    out = tuple(m * b + (1.0 - m) * c for b, c in zip(brush_rgba[:3], canvas_rgba[:3]))
    return (*out, min(1.0, tot))


# ---------------------------------------------------------------------------
# stamp geometry


class _PerlinNoise:
    """Classic 3D gradient noise, 3 octaves, seeded permutation table."""

    def __init__(self, seed: int):
        rng = random.Random(seed)
        perm = list(range(256))
        rng.shuffle(perm)
        self.perm = perm + perm

    @staticmethod
    def _fade(t):
        return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)

    @staticmethod
    def _grad(h, x, y, z):
        h &= 15
        u = x if h < 8 else y
        v = y if h < 4 else (x if h in (12, 14) else z)
        return (u if (h & 1) == 0 else -u) + (v if (h & 2) == 0 else -v)

    def noise(self, x, y, z):
        X, Y, Z = math.floor(x) & 255, math.floor(y) & 255, math.floor(z) & 255
        x -= math.floor(x)
        y -= math.floor(y)
        z -= math.floor(z)
        u, v, w = self._fade(x), self._fade(y), self._fade(z)
        p = self.perm
        A = p[X] + Y
        AA, AB = p[A] + Z, p[A + 1] + Z
        B = p[X + 1] + Y
        BA, BB = p[B] + Z, p[B + 1] + Z

        def lerp(t, a, b):
            return a + t * (b - a)

        g = self._grad
        return lerp(
            w,
            lerp(
                v,
                lerp(u, g(p[AA], x, y, z), g(p[BA], x - 1, y, z)),
                lerp(u, g(p[AB], x, y - 1, z), g(p[BB], x - 1, y - 1, z)),
            ),
            lerp(
                v,
                lerp(u, g(p[AA + 1], x, y, z - 1), g(p[BA + 1], x - 1, y, z - 1)),
                lerp(u, g(p[AB + 1], x, y - 1, z - 1), g(p[BB + 1], x - 1, y - 1, z - 1)),
            ),
        )

    def octaves(self, x, y, z, n=3):
        total, amp, freq = 0.0, 1.0, 1.0
        for _ in range(n):
            total += amp * self.noise(x * freq, y * freq, z * freq)
            amp *= 0.5
            freq *= 2.0
        return total


_noise_cache: dict[int, _PerlinNoise] = {}


def _get_noise(seed: int) -> _PerlinNoise:
    if seed not in _noise_cache:
        _noise_cache[seed] = _PerlinNoise(seed)
    return _noise_cache[seed]


@dataclass(frozen=True)
class StampGeom:
    """Frozen stamp footprint, carried by deferred adjustment marks.

    ``p1 is None`` means a stationary stamp of the given shape; otherwise a
    tapered capsule (union of swept spheres) between p0 and p1.
    """

    shape: str
    p0: tuple
    r0: float
    p1: tuple | None = None
    r1: float = 0.0
    seed: int = 0

    def aabb(self):
        lo = [self.p0[a] - self.r0 for a in range(3)]
        hi = [self.p0[a] + self.r0 for a in range(3)]
        if self.p1 is not None:
            for a in range(3):
                lo[a] = min(lo[a], self.p1[a] - self.r1)
                hi[a] = max(hi[a], self.p1[a] + self.r1)
        return lo, hi

    @property
    def min_radius(self) -> float:
        return min(self.r0, self.r1) if self.p1 is not None else self.r0

    # 1-Lipschitz signed distance (negative inside)
    def sdf(self, x, y, z):
        if self.p1 is not None:
            return _sd_round_cone(x, y, z, self.p0, self.p1, self.r0, self.r1)
        px, py, pz = x - self.p0[0], y - self.p0[1], z - self.p0[2]
        r = self.r0
        if self.shape == "sphere" or self.shape == "perlin":
            return math.sqrt(px * px + py * py + pz * pz) - r
        if self.shape == "box":
            return max(abs(px), abs(py), abs(pz)) - r
        if self.shape == "cylinder":
            return max(math.hypot(px, py) - r, abs(pz) - r)
        if self.shape == "cone":
            return _sd_capped_cone(px, py, pz, r, r, 0.0)
        raise ValueError(self.shape)

    def _occupied(self, x, y, z) -> bool:
        if self.sdf(x, y, z) >= 0.0:
            return False
        if self.shape == "perlin":
            f = 4.0 / self.r0
            n = _get_noise(self.seed)
            return n.octaves(x * f, y * f, z * f) > 0.0
        return True

    def coverage(self, center, half: float) -> float:
        """Fraction of the cell inside the stamp, in [0, 1].

        Exact 0/1 fast paths against the cell's bounding sphere; boundary
        cells estimated by 2x2x2 sub-sampling of the signed distance.  A
        stamp far smaller than the cell can slip between the sub-samples,
        so a volume-ratio floor keeps coverage positive when the stamp
        anchor sits inside the cell (small brushes must still mark coarse
        cells for refinement).
        """
        bound = half * _SQRT3
        d = self.sdf(*center)
        if d >= bound:
            return 0.0
        if self.shape != "perlin" and d <= -bound:
            return 1.0
        q = half * 0.5
        sub = half  # sub-cell edge length, for the linear coverage ramp
        total = 0.0
        for k in range(8):
            sx = center[0] + (q if k & 1 else -q)
            sy = center[1] + (q if k & 2 else -q)
            sz = center[2] + (q if k & 4 else -q)
            ds = self.sdf(sx, sy, sz)
            cov = min(1.0, max(0.0, 0.5 - ds / sub))
            if cov > 0.0 and self.shape == "perlin":
                f = 4.0 / self.r0
                if _get_noise(self.seed).octaves(sx * f, sy * f, sz * f) <= 0.0:
                    cov = 0.0
            total += cov
        frac = total / 8.0
        if frac == 0.0 and self._anchor_inside(center, half):
            frac = min(1.0, (self.min_radius / (2.0 * half)) ** 3)
        return frac

    def _anchor_inside(self, center, half: float) -> bool:
        for p in (self.p0, self.p1) if self.p1 is not None else (self.p0,):
            if all(abs(p[a] - center[a]) <= half for a in range(3)):
                return True
        return False


def _sd_capped_cone(px, py, pz, h, r1, r2):
    # finite cone along z: radius r1 at z=-h, r2 at z=+h (Quilez formula)
    qx, qy = math.hypot(px, py), pz
    k1x, k1y = r2, h
    k2x, k2y = r2 - r1, 2.0 * h
    cax = qx - min(qx, r1 if qy < 0.0 else r2)
    cay = abs(qy) - h
    t = ((k1x - qx) * k2x + (k1y - qy) * k2y) / (k2x * k2x + k2y * k2y)
    t = min(1.0, max(0.0, t))
    cbx = qx - k1x + k2x * t
    cby = qy - k1y + k2y * t
    s = -1.0 if (cbx < 0.0 and cay < 0.0) else 1.0
    return s * math.sqrt(min(cax * cax + cay * cay, cbx * cbx + cby * cby))


def _sd_round_cone(x, y, z, a, b, r1, r2):
    # union of spheres swept from (a, r1) to (b, r2)
    bax, bay, baz = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    l2 = bax * bax + bay * bay + baz * baz
    rr = r1 - r2
    a2 = l2 - rr * rr
    if l2 <= 1e-300 or a2 <= 0.0:
        # degenerate: one endpoint sphere contains the sweep
        d0 = math.dist((x, y, z), a) - r1
        d1 = math.dist((x, y, z), b) - r2
        return min(d0, d1)
    il2 = 1.0 / l2
    pax, pay, paz = x - a[0], y - a[1], z - a[2]
    yv = pax * bax + pay * bay + paz * baz
    zv = yv - l2
    fx = pax * l2 - bax * yv
    fy = pay * l2 - bay * yv
    fz = paz * l2 - baz * yv
    x2 = fx * fx + fy * fy + fz * fz
    y2 = yv * yv * l2
    z2 = zv * zv * l2
    k = math.copysign(1.0, rr) * rr * rr * x2
    if math.copysign(1.0, zv) * a2 * z2 > k:
        return math.sqrt(x2 + z2) * il2 - r2
    if math.copysign(1.0, yv) * a2 * y2 < k:
        return math.sqrt(x2 + y2) * il2 - r1
    return (math.sqrt(x2 * a2 * il2) + yv * rr) * il2 - r1


def stamp_coverage(stamp: StampGeom, cell_lo, cell_hi) -> float:
    """Coverage of an axis-aligned cell by a stamp."""
    center = tuple((lo + hi) / 2.0 for lo, hi in zip(cell_lo, cell_hi))
    half = (cell_hi[0] - cell_lo[0]) / 2.0
    return stamp.coverage(center, half)


# ---------------------------------------------------------------------------
# adaptive depth


def target_depth(brush_radius: float, config: CanvasConfig) -> int:
    """Smallest depth whose voxels put ~10 cells across the brush radius."""
    if brush_radius <= 0:
        raise ValueError("radius must be positive")
    d = math.ceil(math.log2(VOXELS_PER_RADIUS * config.root_size / brush_radius))
    return min(max(d, 0), config.max_depth)


def effective_max_depth(position, rooms, config: CanvasConfig) -> int:
    """Depth limit at a point: full detail inside rooms, falling off with
    distance (in room diameters) outside, never below ``detail_min_depth``."""
    if not rooms:
        return config.max_depth
    best = None
    for room in rooms:
        if room.contains(position):
            return config.max_depth
        d = room.distance(position)
        if best is None or d < best[0]:
            best = (d, room)
    dist, room = best
    drop = int(math.floor(math.log2(1.0 + dist / room.diameter)) * config.detail_falloff)
    return max(config.max_depth - drop, config.detail_min_depth)


# ---------------------------------------------------------------------------
# stroke resampling


def resample_stroke(samples, radius_of=None):
    """Sub-sample a stroke to ~5 Hz, keeping first and last samples.

    Intermediate samples are kept after 0.2 s or after moving half a brush
    radius, whichever comes first.  ``radius_of`` maps a sample to its
    effective radius (defaults to 1).
    """
    if radius_of is None:
        radius_of = lambda s: 1.0
    kept = []
    last = None
    for s in samples:
        if last is None:
            kept.append(s)
            last = s
            continue
        dt = s.time - last.time
        dist = math.dist(s.position, last.position)
        if dt >= RESAMPLE_INTERVAL_S or dist >= RESAMPLE_DISTANCE_RADII * radius_of(s):
            kept.append(s)
            last = s
    if samples and kept[-1] is not samples[-1]:
        kept.append(samples[-1])
    return kept


# ---------------------------------------------------------------------------
# deferred adjustment queue


class AdjustmentQueue:
    """Cells marked for one-level refinement or coarsening.

    A cell is never in both sets; the newest mark wins.  Refine marks carry
    the stamps that requested them so refinement can follow the stamp
    footprint down the tree, plus the cell's center and half-width so the
    processing loop never has to recover geometry from the tree.
    """

    def __init__(self):
        self.refine_marks: dict[int, tuple] = {}
        self.coarsen_marks: dict[int, tuple] = {}

    def mark_refine(self, cell: int, center, half: float, stamp: StampGeom):
        self.coarsen_marks.pop(cell, None)
        prev = self.refine_marks.get(cell)
        stamps = prev[2] if prev else []
        stamps.append(stamp)
        self.refine_marks[cell] = (center, half, stamps)

    def mark_coarsen(self, cell: int, center, half: float, stamp: StampGeom):
        self.refine_marks.pop(cell, None)
        prev = self.coarsen_marks.get(cell)
        stamps = prev[2] if prev else []
        stamps.append(stamp)
        self.coarsen_marks[cell] = (center, half, stamps)

    def __len__(self):
        return len(self.refine_marks) + len(self.coarsen_marks)

    def empty(self) -> bool:
        return not self.refine_marks and not self.coarsen_marks


# ---------------------------------------------------------------------------
# stamp application


def _roots_overlapping(canvas: Canvas, lo, hi):
    cfg = canvas.config
    half = cfg.extent / 2.0
    r = cfg.root_count_per_axis
    rng = []
    for a in range(3):
        g0 = int(math.floor((lo[a] + half) / cfg.root_size))
        g1 = int(math.floor((hi[a] + half) / cfg.root_size))
        g0, g1 = max(g0, 0), min(g1, r - 1)
        if g0 > g1:
            return
        rng.append((g0, g1))
    for gz in range(rng[2][0], rng[2][1] + 1):
        for gy in range(rng[1][0], rng[1][1] + 1):
            for gx in range(rng[0][0], rng[0][1] + 1):
                yield canvas.root_at(gx, gy, gz)


def walk_stamp(canvas: Canvas, stamp: StampGeom, visit_leaf, visit_interior=None):
    """Visit leaves with coverage > 0 under a stamp, pruning by SDF.

    ``visit_leaf(cell, center, half, coverage)`` is called per touched leaf;
    ``visit_interior(cell, center, half, fully_inside)`` per non-leaf whose
    subtree is entered.
    """
    cfg = canvas.config
    half_ext = cfg.extent / 2.0
    lo, hi = stamp.aabb()
    first_child = canvas.first_child
    for root in _roots_overlapping(canvas, lo, hi):
        g = canvas.root_grid(root)
        w = cfg.root_size
        cx = tuple(-half_ext + (g[a] + 0.5) * w for a in range(3))
        stack = [(root, cx, w / 2.0)]
        while stack:
            cell, center, half = stack.pop()
            d = stamp.sdf(*center)
            bound = half * _SQRT3
            if d >= bound:
                continue
            fc = int(first_child[cell])
            if fc == NONE:
                cov = stamp.coverage(center, half)
                if cov > 0.0:
                    visit_leaf(cell, center, half, cov)
                continue
            if visit_interior is not None:
                visit_interior(cell, center, half, d <= -bound)
            q = half / 2.0
            for k in range(8):
                ccx = (
                    center[0] + (q if k & 1 else -q),
                    center[1] + (q if k & 2 else -q),
                    center[2] + (q if k & 4 else -q),
                )
                stack.append((fc + k, ccx, q))


def apply_stamp(canvas: Canvas, brush: Brush, stamp: StampGeom,
                queue: AdjustmentQueue | None = None, rooms=None) -> int:
    """Apply one stamp at the current tree topology.

    Returns the number of leaves touched.  Refinement and coarsening are
    only marked (in ``queue``); the tree itself is untouched.
    """
    cfg = canvas.config
    mode = brush.mode
    b_alpha = brush.rgba[3]
    b_rgb = brush.rgba[:3]
    rgba = canvas.rgba
    tdepth = target_depth(stamp.min_radius, cfg)
    rooms = rooms or []
    touched = 0

    def visit_leaf(cell, center, half, cov):
        nonlocal touched
        touched += 1
        eff = b_alpha * cov
        c = rgba[cell]
        if mode == "paint":
            out = blend_color((*b_rgb, eff), (float(c[0]), float(c[1]), float(c[2]), float(c[3])))
            rgba[cell] = out
        elif mode == "erase":
            rgba[cell, 3] = float(c[3]) * (1.0 - eff)
        else:  # recolor
            m = eff
            rgba[cell, 0] = m * b_rgb[0] + (1.0 - m) * float(c[0])
            rgba[cell, 1] = m * b_rgb[1] + (1.0 - m) * float(c[1])
            rgba[cell, 2] = m * b_rgb[2] + (1.0 - m) * float(c[2])
        canvas.mark_dirty(cell)
        if queue is not None:
            depth = canvas.depth_of(cell)
            limit = min(tdepth, effective_max_depth(center, rooms, cfg))
            if depth < limit:
                queue.mark_refine(cell, center, half, stamp)

    def visit_interior(cell, center, half, fully_inside):
        if queue is None or not fully_inside:
            return
        depth = canvas.depth_of(cell)
        if depth >= tdepth:
            fc = int(canvas.first_child[cell])
            if all(canvas.first_child[fc + k] == NONE for k in range(8)):
                queue.mark_coarsen(cell, center, half, stamp)

    walk_stamp(canvas, stamp, visit_leaf, visit_interior)
    return touched


def pickup_color(canvas: Canvas, stamp: StampGeom):
    """Coverage-weighted mean canvas rgba under a stamp, or None if empty.

    Weights are coverage * volume * alpha, so unpainted space contributes
    nothing and the result follows what the stamp would actually lift.
    """
    acc = [0.0, 0.0, 0.0, 0.0]
    wsum = 0.0

    def visit_leaf(cell, center, half, cov):
        nonlocal wsum
        c = canvas.rgba[cell]
        alpha = float(c[3])
        w = cov * (2.0 * half) ** 3 * alpha
        if w > 0.0:
            acc[0] += w * float(c[0])
            acc[1] += w * float(c[1])
            acc[2] += w * float(c[2])
            acc[3] += w * alpha
            wsum += w

    walk_stamp(canvas, stamp, visit_leaf)
    if wsum <= 0.0:
        return None
    return tuple(a / wsum for a in acc)


# ---------------------------------------------------------------------------
# deferred processing


def process_adjustments(canvas: Canvas, queue: AdjustmentQueue, budget: int,
                        rooms=None) -> int:
    """Run up to ``budget`` one-level adjustments; returns work done.

    Refine marks re-mark the children still above their stamp's target
    depth.  Coarsen marks only merge leaves whose colors agree within
    MERGE_TOLERANCE of their mean, and re-mark the parent so a uniform
    region keeps merging one level per frame.
    """
    cfg = canvas.config
    rooms = rooms or []
    work = 0

    pending = [(c, *geom) for c, geom in queue.refine_marks.items()]
    queue.refine_marks.clear()
    requeue_refine = []
    idx = 0
    while idx < len(pending):
        cell, center, half, stamps = pending[idx]
        idx += 1
        if work >= budget:
            requeue_refine.append((cell, center, half, stamps))
            continue
        if not canvas.is_live(cell):
            continue
        if not canvas.is_leaf(cell):
            # refined by an earlier mark this frame: push stamps down
            pending.extend(_child_marks(canvas, cell, center, half, stamps,
                                        rooms, cfg))
            continue
        if not _needs_refine(canvas, cell, center, half, stamps, rooms, cfg):
            continue
        try:
            canvas.refine_cell(cell)
        except PoolExhausted:
            requeue_refine.append((cell, center, half, stamps))
            requeue_refine.extend(pending[idx:])
            break
        work += 1
        pending.extend(_child_marks(canvas, cell, center, half, stamps,
                                    rooms, cfg))

    for cell, center, half, stamps in requeue_refine:
        for s in stamps:
            queue.mark_refine(cell, center, half, s)

    coarsen_items = list(queue.coarsen_marks.items())
    queue.coarsen_marks.clear()
    for cell, (center, half, stamps) in coarsen_items:
        if work >= budget:
            for s in stamps:
                queue.mark_coarsen(cell, center, half, s)
            continue
        if not canvas.is_live(cell) or canvas.is_leaf(cell):
            continue
        fc = int(canvas.first_child[cell])
        children = [fc + k for k in range(8)]
        if any(not canvas.is_leaf(c) for c in children):
            # children still merging: retry while that can make progress
            if any(c in queue.coarsen_marks for c in children):
                for s in stamps:
                    queue.mark_coarsen(cell, center, half, s)
            continue
        cols = canvas.rgba[fc : fc + 8].astype(np.float64)
        mean = cols.mean(axis=0)
        if np.abs(cols - mean).max() > MERGE_TOLERANCE:
            continue
        canvas.coarsen_cell(cell)
        work += 1
        parent = int(canvas.parent[cell])
        if parent != cell:
            _maybe_remark_coarsen(canvas, parent, stamps, queue, cfg)
    return work


def _needs_refine(canvas, cell, center, half, stamps, rooms, cfg) -> bool:
    depth = canvas.depth_of(cell)
    limit = effective_max_depth(center, rooms, cfg)
    for s in stamps:
        if depth >= min(target_depth(s.min_radius, cfg), limit):
            continue
        if s.coverage(center, half) > 0.0:
            return True
    return False


def _child_marks(canvas, cell, center, half, stamps, rooms, cfg):
    """Marks for the children of a just-refined cell, geometry derived in
    place (child center = parent center +- half/2)."""
    out = []
    fc = int(canvas.first_child[cell])
    if fc == NONE:
        return out
    q = half / 2.0
    cdepth = canvas.depth_of(cell) + 1
    for k in range(8):
        child = fc + k
        ccenter = (
            center[0] + (q if k & 1 else -q),
            center[1] + (q if k & 2 else -q),
            center[2] + (q if k & 4 else -q),
        )
        limit = effective_max_depth(ccenter, rooms, cfg)
        live = [
            s for s in stamps
            if cdepth < min(target_depth(s.min_radius, cfg), limit)
            and s.coverage(ccenter, q) > 0.0
        ]
        if live:
            out.append((child, ccenter, q, live))
    return out


def _maybe_remark_coarsen(canvas, parent, stamps, queue, cfg):
    center, w = canvas.cell_center_width(parent)
    depth = canvas.depth_of(parent)
    for s in stamps:
        if depth < target_depth(s.min_radius, cfg):
            continue
        if s.sdf(*center) <= -(w / 2.0) * _SQRT3:
            queue.mark_coarsen(parent, tuple(center), w / 2.0, s)
            return


# ---------------------------------------------------------------------------
# the engine: strokes in, stamps + marks out


class PaintEngine:
    """Serialized owner of all canvas mutation.

    Feeds stroke samples through sub-sampling, per-sample pick-up, stamp
    application, and the per-frame adjustment budget.
    """

    def __init__(self, canvas: Canvas, budget_per_frame: int = 256):
        self.canvas = canvas
        self.brush = Brush()
        self.rooms: list[Room] = []
        self.queue = AdjustmentQueue()
        self.budget_per_frame = budget_per_frame
        self._stroke_active = False
        self._working_rgb = self.brush.rgba[:3]
        self._last_kept: StrokeSample | None = None
        self._last_raw: StrokeSample | None = None
        self._last_radius = 0.0

    def set_brush(self, brush: Brush):
        if self._stroke_active:
            raise ValueError("cannot change brush mid-stroke")
        self.brush = brush
        self._working_rgb = brush.rgba[:3]

    def add_room(self, room: Room):
        half = self.canvas.config.extent / 2.0
        for lo, hi in zip(room.box_min, room.box_max):
            if lo < -half or hi > half:
                raise ValueError("room extends outside the canvas")
        self.rooms.append(room)

    def room_by_name(self, name: str) -> Room | None:
        for r in self.rooms:
            if r.name == name:
                return r
        return None

    def stroke_begin(self):
        if self._stroke_active:
            raise ValueError("stroke already active")
        self._stroke_active = True
        self._working_rgb = self.brush.rgba[:3]
        self._last_kept = None
        self._last_raw = None

    def effective_radius(self, sample: StrokeSample) -> float:
        return self.brush.radius * sample.zoom * (0.5 + 0.5 * sample.pressure)

    def add_sample(self, sample: StrokeSample) -> int:
        """Feed one raw input sample; returns leaves touched (0 if dropped)."""
        if not self._stroke_active:
            raise ValueError("sample outside stroke")
        self._last_raw = sample
        if self._last_kept is not None:
            dt = sample.time - self._last_kept.time
            dist = math.dist(sample.position, self._last_kept.position)
            if dt < RESAMPLE_INTERVAL_S and dist < RESAMPLE_DISTANCE_RADII * self.effective_radius(sample):
                return 0
        return self._apply_sample(sample)

    def stroke_end(self) -> int:
        if not self._stroke_active:
            raise ValueError("no active stroke")
        touched = 0
        if self._last_raw is not None and self._last_raw is not self._last_kept:
            touched = self._apply_sample(self._last_raw)
        self._stroke_active = False
        self._working_rgb = self.brush.rgba[:3]  # pick-up is per stroke
        self._last_kept = None
        self._last_raw = None
        return touched

    def _apply_sample(self, sample: StrokeSample) -> int:
        r = self.effective_radius(sample)
        pos = tuple(sample.position)
        if self.brush.shape == "sphere" and self._last_kept is not None:
            stamp = StampGeom("sphere", tuple(self._last_kept.position),
                              self._last_radius, pos, r)
        else:
            stamp = StampGeom(self.brush.shape, pos, r, seed=self.brush.noise_seed)
        if self.brush.pickup_strength > 0.0:
            picked = pickup_color(self.canvas, stamp)
            if picked is not None:
                s = self.brush.pickup_strength
                self._working_rgb = tuple(
                    (1.0 - s) * w + s * p
                    for w, p in zip(self._working_rgb, picked[:3])
                )
        brush = replace(self.brush, rgba=(*self._working_rgb, self.brush.rgba[3]))
        touched = apply_stamp(self.canvas, brush, stamp, self.queue, self.rooms)
        self._last_kept = sample
        self._last_radius = r
        return touched

    def frame(self) -> int:
        """One adjustment frame tick."""
        return process_adjustments(self.canvas, self.queue, self.budget_per_frame, self.rooms)

    def drain(self, max_frames: int = 100_000) -> int:
        """Run frames until the queue empties; returns frames used."""
        frames = 0
        while not self.queue.empty() and frames < max_frames:
            before = len(self.queue)
            work = self.frame()
            frames += 1
            if work == 0 and len(self.queue) >= before:
                break  # no progress possible (e.g. pool exhausted)
        return frames
