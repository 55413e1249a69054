"""Scene generators for tests, benchmarks, and the shipped sample script.

``make_deep_scene`` builds the precision-analysis scene: a refinement
cascade around a focus point, where cells of depth d exist within a shell
of radius ~halo * width(d+1).  Rays aimed at the focus cross a few coarse
roots plus a ladder of progressively finer cells down to the cascade depth,
which is exactly the regime where single-precision traversal in world
coordinates falls apart.
"""

from __future__ import annotations

import json
import math

from .octree import NONE, Canvas, CanvasConfig
from .paint import Brush, PaintEngine, Room, StampGeom, StrokeSample, apply_stamp

_SQRT3 = math.sqrt(3.0)


def _leaves_in_ball(canvas: Canvas, center, radius):
    cfg = canvas.config
    half_ext = cfg.extent / 2.0
    out = []
    for root in range(canvas.root_count):
        g = canvas.root_grid(root)
        w = cfg.root_size
        cx = tuple(-half_ext + (g[a] + 0.5) * w for a in range(3))
        stack = [(root, cx, w / 2.0)]
        while stack:
            cell, c, h = stack.pop()
            dist = math.dist(c, center)
            if dist > radius + h * _SQRT3:
                continue
            fc = int(canvas.first_child[cell])
            if fc == NONE:
                out.append((cell, c, h))
                continue
            q = h / 2.0
            for k in range(8):
                cc = (
                    c[0] + (q if k & 1 else -q),
                    c[1] + (q if k & 2 else -q),
                    c[2] + (q if k & 4 else -q),
                )
                stack.append((fc + k, cc, q))
    return out


def make_deep_scene(config: CanvasConfig | None = None, focus=None,
                    depth: int = 20, halo: float = 3.0,
                    paint_alpha: float = 0.0) -> tuple[Canvas, tuple]:
    """Canvas with a depth cascade around ``focus``; returns (canvas, focus).

    ``paint_alpha`` > 0 additionally paints the cascade core so renders of
    the scene show something; the analysis wants it transparent (rays must
    sweep the whole canvas).
    """
    canvas = Canvas(config or CanvasConfig())
    cfg = canvas.config
    if focus is None:
        # off-center, off-axis: no symmetric special cases
        focus = (0.123 * cfg.root_size, -0.234 * cfg.root_size, 0.0456 * cfg.root_size)
    depth = min(depth, cfg.max_depth)
    for d in range(depth):
        w_next = cfg.cell_width(d + 1)
        batch = [
            cell for cell, _c, _h in _leaves_in_ball(canvas, focus, halo * w_next)
            if canvas.depth_of(cell) == d
        ]
        canvas.bulk_refine(batch)
    canvas.rebuild_all_neighbors()
    if paint_alpha > 0.0:
        r = cfg.cell_width(max(depth - 6, 0))
        brush = Brush(shape="sphere", radius=r, rgba=(0.9, 0.6, 0.2, paint_alpha))
        apply_stamp(canvas, brush, StampGeom("sphere", focus, r))
    return canvas, focus


def _leaves_near_segment(canvas: Canvas, a, b, radius):
    """Leaves whose bounding sphere touches a capsule around segment a-b."""
    cfg = canvas.config
    half_ext = cfg.extent / 2.0
    ab = [b[k] - a[k] for k in range(3)]
    ab2 = sum(v * v for v in ab)

    def seg_dist(p):
        if ab2 == 0.0:
            return math.dist(p, a)
        t = sum((p[k] - a[k]) * ab[k] for k in range(3)) / ab2
        t = min(1.0, max(0.0, t))
        return math.dist(p, [a[k] + t * ab[k] for k in range(3)])

    out = []
    for root in range(canvas.root_count):
        g = canvas.root_grid(root)
        w = cfg.root_size
        cx = tuple(-half_ext + (g[k] + 0.5) * w for k in range(3))
        stack = [(root, cx, w / 2.0)]
        while stack:
            cell, c, h = stack.pop()
            if seg_dist(c) > radius + h * _SQRT3:
                continue
            fc = int(canvas.first_child[cell])
            if fc == NONE:
                out.append(cell)
                continue
            q = h / 2.0
            for k in range(8):
                cc = (
                    c[0] + (q if k & 1 else -q),
                    c[1] + (q if k & 2 else -q),
                    c[2] + (q if k & 4 else -q),
                )
                stack.append((fc + k, cc, q))
    return out


def _refine_lod_ball(canvas: Canvas, center, max_radius: float,
                     min_width: float, halo: float):
    """Concentric LOD: inside ``max_radius`` of center, cells shrink toward
    the center until width <= max(dist/halo, min_width).  Uses bulk
    refinement; the caller rebuilds stored neighbors afterwards."""
    cfg = canvas.config
    while True:
        batch = []
        for cell, c, h in _leaves_in_ball(canvas, center, max_radius):
            w = 2.0 * h
            dist = max(math.dist(c, center) - h * _SQRT3, 0.0)
            if dist > max_radius:
                continue
            target = max(dist / halo, min_width)
            if w > target * 1.0001 and canvas.depth_of(cell) < cfg.max_depth:
                batch.append(cell)
        if not batch:
            break
        canvas.bulk_refine(batch)


def make_analysis_scene(config: CanvasConfig | None = None, core_depth: int = 22,
                        base_depth: int = 5):
    """The precision-experiment scene; returns (canvas, camera spec dict).

    Three ray populations, each pinned to one regime of the traversal
    error budget:

      - "wide": a 14-degree fan from eye A toward the far corner over the
        uniform base grid, terminating on a distant backdrop: the bulk
        population; drift angle falls like 1/sqrt(L).
      - "kernel": a needle fan from eye A at an opaque kernel 4.2 km away,
        just behind a focus point carrying a detail cascade down to
        ``core_depth``.  Eye A sits in a coarse base cell while the needle
        corridor is refined to ~80 m cells, so the float32 rounding of the
        entry point dominates: the short-L, smallest-n, largest-angle
        population (the e0/L regime).
      - "zoom": a needle fan from eye B, which sits *inside* a 4.2 km tube
        of sub-meter cells aimed at the focus from a perpendicular
        direction, terminating on its own kernel.  In cell-local
        coordinates these are the most accurate rays of all; in world
        float32 coordinates the thousands of small-cell crossings ~15 km
        from the origin drift catastrophically (the drift-contrast regime).
    """
    canvas = Canvas(config or CanvasConfig())
    cfg = canvas.config
    half = cfg.extent / 2.0
    core_depth = min(core_depth, cfg.max_depth)

    focus = (0.62 * half, -0.55 * half, 0.58 * half)
    far = (-0.92 * half, 0.88 * half, -0.9 * half)
    v = [far[k] - focus[k] for k in range(3)]
    vn = math.sqrt(sum(x * x for x in v))
    v = [x / vn for x in v]
    eye_a = tuple(focus[k] - 4200.0 * v[k] for k in range(3))

    # a perpendicular approach direction for the zoom tube
    u = [v[1] - v[2], v[2] - v[0], v[0] - v[1]]
    dot = sum(u[k] * v[k] for k in range(3))
    u = [u[k] - dot * v[k] for k in range(3)]
    un = math.sqrt(sum(x * x for x in u))
    u = [x / un for x in u]
    if any(abs(focus[k] - 4300.0 * u[k]) > 0.98 * half for k in range(3)):
        u = [-x for x in u]
    eye_b = tuple(focus[k] - 4200.0 * u[k] for k in range(3))

    # uniform base grid
    for _ in range(base_depth):
        canvas.bulk_refine(list(canvas.iter_leaves()))

    # nudge eye A so its float32 entry rounding is representative, not a
    # lucky near-zero: the e0/L term must actually show up at small L
    eye_a = _tune_entry_rounding(canvas, eye_a, v)

    # focus cascade, capped well clear of both eyes
    _refine_lod_ball(canvas, focus, max_radius=600.0,
                     min_width=cfg.cell_width(core_depth), halo=3.0)

    # kernel-ray corridor: medium cells so corridor drift stays below the
    # entry rounding error; starts past eye A's own (coarse) cell
    corr_from = tuple(eye_a[k] + 560.0 * v[k] for k in range(3))
    for d in range(base_depth, 7):
        batch = [
            cell for cell in _leaves_near_segment(canvas, corr_from, focus, 3.0)
            if canvas.depth_of(cell) == d
        ]
        canvas.bulk_refine(batch)

    # zoom tube: constant ~0.6 m cells from behind eye B to the focus
    tube_from = tuple(eye_b[k] + 25.0 * u[k] for k in range(3))
    tube_depth = 14
    w_tube = cfg.cell_width(tube_depth)
    for d in range(base_depth, tube_depth):
        batch = [
            cell for cell in _leaves_near_segment(canvas, tube_from, focus,
                                                  0.7 + w_tube)
            if canvas.depth_of(cell) == d
        ]
        canvas.bulk_refine(batch)

    canvas.rebuild_all_neighbors()

    # opaque kernels just past the focus on each needle axis; rays cross
    # the transparent finest cells first, then terminate
    kernel_r = 1.8
    kern_a = tuple(focus[k] + 4.0 * v[k] for k in range(3))
    kern_b = tuple(focus[k] + 4.0 * u[k] for k in range(3))
    for kc in (kern_a, kern_b):
        brush = Brush(shape="sphere", radius=kernel_r, rgba=(0.95, 0.2, 0.15, 0.92))
        apply_stamp(canvas, brush, StampGeom("sphere", kc, kernel_r))

    # backdrop: a broad opaque wall near the end of the wide fan
    bd_center = tuple(eye_a[k] + 40_000.0 * v[k] for k in range(3))
    brush = Brush(shape="sphere", radius=9000.0, rgba=(0.35, 0.3, 0.5, 0.85))
    apply_stamp(canvas, brush, StampGeom("sphere", bd_center, 9000.0))

    return canvas, {
        "eye": eye_a,
        "look": tuple(far),
        "focus": focus,
        "fov_wide_deg": 14.0,
        "fov_kernel_deg": math.degrees(2.0 * 1.4 / 4200.0),
        "zoom_eye": eye_b,
        "zoom_look": tuple(focus[k] + 30.0 * u[k] for k in range(3)),
        "fov_zoom_deg": math.degrees(2.0 * 0.4 / 4200.0),
    }


def _tune_entry_rounding(canvas: Canvas, eye, v):
    """Shift the eye slightly until its cell-local float32 rounding error is
    in the upper range (~half a coordinate ulp per axis)."""
    import numpy as np

    best = None
    for k in range(64):
        cand = tuple(eye[a] + 0.37 * k * v[a] + 0.11 * k * (a - 1) for a in range(3))
        try:
            _cell, local = canvas.locate_leaf(cand)
        except Exception:
            continue
        err = math.sqrt(sum((float(np.float32(x)) - x) ** 2 for x in local))
        if 1.2e-8 <= err <= 2.2e-8:
            return cand
        if best is None or err > best[0]:
            best = (err, cand)
    return best[1]


# ---------------------------------------------------------------------------
# the shipped two-room sample session


def sample_script_events():
    """Deterministic stroke-script events for the repo's sample session.

    Two rooms (a big airy one and a small detail room), a large background
    wash, a swept capsule stroke, some erasing, and fine detail strokes
    inside the small room.
    """
    ev = []

    def brush(t, **kw):
        b = dict(shape="sphere", radius=1.0, rgba=[1, 1, 1, 1],
                 mode="paint", pickup_strength=0.0, noise_seed=0)
        b.update(kw)
        ev.append({"t": t, "type": "brush", "brush": b})

    def stroke(t0, points, pressure=1.0, zoom=1.0, dt=0.25):
        ev.append({"type": "stroke_begin"})
        for k, p in enumerate(points):
            ev.append({
                "t": t0 + k * dt,
                "type": "sample",
                "pos": [float(v) for v in p],
                "pressure": pressure,
                "zoom": zoom,
            })
        ev.append({"type": "stroke_end"})

    ev.append({"type": "room", "name": "vista", "min": [-2500, -1500, -2500],
               "max": [2500, 1500, 2500], "scale": 1.0})
    ev.append({"type": "room", "name": "detail", "min": [700, -300, 600],
               "max": [900, -100, 800], "scale": 0.05})

    # background sky wash: a broad high-altitude sweep
    brush(0.0, radius=2600.0, rgba=[0.25, 0.45, 0.85, 0.6])
    stroke(0.0, [(-6000, 4000, -4000), (0, 5000, 0), (6000, 4200, 4000)])
    for _ in range(3):
        ev.append({"type": "frame"})

    # a warm ground blob
    brush(2.0, radius=1800.0, rgba=[0.55, 0.4, 0.2, 0.9])
    stroke(2.0, [(-1000, -2600, 500), (1500, -2800, -500)])
    for _ in range(3):
        ev.append({"type": "frame"})

    # mid-size mixed stroke with pick-up across the two washes
    brush(4.0, radius=700.0, rgba=[0.9, 0.2, 0.2, 0.5], pickup_strength=0.4)
    stroke(4.0, [(-2000, 0, 0), (-500, 500, 200), (1000, 900, 300)])
    for _ in range(4):
        ev.append({"type": "frame"})

    # erase a tunnel through the wash
    brush(6.0, radius=500.0, rgba=[0, 0, 0, 0.9], mode="erase")
    stroke(6.0, [(-300, 300, -1500), (-300, 350, 1500)])
    for _ in range(4):
        ev.append({"type": "frame"})

    # fine detail inside the small room
    brush(8.0, radius=40.0, rgba=[0.95, 0.85, 0.1, 0.9])
    stroke(8.0, [(780, -220, 680), (800, -200, 700), (820, -180, 720)], dt=0.3)
    brush(10.0, radius=24.0, rgba=[0.1, 0.8, 0.3, 1.0], shape="perlin",
          noise_seed=7)
    stroke(10.0, [(800, -200, 700), (812, -188, 712)], dt=0.3)
    for _ in range(30):
        ev.append({"type": "frame"})
    return ev


def write_sample_script(path):
    with open(path, "w", encoding="utf-8") as f:
        for e in sample_script_events():
            f.write(json.dumps(e, separators=(",", ":")) + "\n")


def make_two_room_scene() -> PaintEngine:
    """The sample session applied directly (no script parsing)."""
    from .script import apply_events

    canvas = Canvas(CanvasConfig())
    engine = PaintEngine(canvas)
    apply_events(engine, sample_script_events())
    return engine
