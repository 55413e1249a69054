"""Floating-point drift analysis for the ray caster.

For every analyzed ray we run the single-precision cell-local traversal and
compare its endpoint against an exact double-precision continuation of the
same ray to the same final face plane (the plane is dyadic, so forcing the
oracle to the traversal's own face choice pins both to identical topology).
The angle error is measured between the fixed float32 direction and the
direction from canvas entry to the traversal endpoint.

The bound under test: angle <= asin(sqrt(2) * (e0/L + 7.5 * 2^-23)) with e0
the float32 rounding error of the entry point (in world units) and L the
path length; positional error is bounded by e0 + 7.5 * 2^-23 * L.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._kernel import make_kernel
from .octree import Canvas
from .render import Camera

EPS32 = 2.0**-23
BOUND_FACTOR = 7.5  # error growth per unit length: 2.5 eps per cell, sum w <= 3L


@dataclass
class RayRecord:
    length: float  # L, meters
    n: int  # crossed cells
    angle_deg: float
    pos_err: float  # meters
    e0_local: float
    e0_world: float
    sum_width: float
    bound_deg: float
    violation: bool
    aborted: bool


@dataclass
class BinStat:
    bin_key: str
    count: int
    max_deg: float
    p99_deg: float
    mean_deg: float


@dataclass
class ErrorReport:
    mode: str
    records: list = field(default_factory=list)
    aborted: int = 0
    skipped: int = 0  # rays that missed the canvas or crossed nothing

    @property
    def count(self) -> int:
        return len(self.records)

    @property
    def max_angle_deg(self) -> float:
        return max((r.angle_deg for r in self.records), default=0.0)

    @property
    def violations(self) -> int:
        return sum(1 for r in self.records if r.violation)

    def bins_by_length(self, n_bins=8):
        return _bin_stats([r for r in self.records], key=lambda r: r.length,
                          n_bins=n_bins, prefix="L")

    def bins_by_crossings(self, n_bins=8):
        return _bin_stats([r for r in self.records], key=lambda r: float(r.n),
                          n_bins=n_bins, prefix="n")

    def summary(self) -> dict:
        recs = self.records
        ratios = [r.sum_width / r.length for r in recs if r.length > 0]
        return {
            "mode": self.mode,
            "count": self.count,
            "aborted": self.aborted,
            "skipped": self.skipped,
            "violations": self.violations,
            "max_angle_deg": self.max_angle_deg,
            "mean_angle_deg": float(np.mean([r.angle_deg for r in recs])) if recs else 0.0,
            "max_pos_err": max((r.pos_err for r in recs), default=0.0),
            "max_e0_local": max((r.e0_local for r in recs), default=0.0),
            "sum_width_over_length": {
                "mean": float(np.mean(ratios)) if ratios else 0.0,
                "max": float(np.max(ratios)) if ratios else 0.0,
            },
            "bins_by_L": [asdict(b) for b in self.bins_by_length()],
            "bins_by_n": [asdict(b) for b in self.bins_by_crossings()],
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.summary(), f, indent=2)

    def write_scatter_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as f:
            w = csv.writer(f)
            w.writerow(["L", "n", "angle_deg", "pos_err"])
            for r in self.records:
                w.writerow([repr(r.length), r.n, repr(r.angle_deg), repr(r.pos_err)])


def _bin_stats(records, key, n_bins, prefix):
    vals = np.array([key(r) for r in records])
    if len(vals) == 0:
        return []
    lo, hi = float(vals.min()), float(vals.max())
    if lo <= 0 or hi / max(lo, 1e-300) < 4.0:
        edges = np.linspace(lo, hi + 1e-12, n_bins + 1)
    else:
        edges = np.geomspace(lo, hi * (1 + 1e-12), n_bins + 1)
    out = []
    angles = np.array([r.angle_deg for r in records])
    for b in range(n_bins):
        mask = (vals >= edges[b]) & (vals < edges[b + 1])
        if b == n_bins - 1:
            mask |= vals == edges[b + 1]
        if not mask.any():
            continue
        a = angles[mask]
        out.append(BinStat(
            bin_key=f"{prefix}[{edges[b]:.6g},{edges[b + 1]:.6g})",
            count=int(mask.sum()),
            max_deg=float(a.max()),
            p99_deg=float(np.percentile(a, 99)),
            mean_deg=float(a.mean()),
        ))
    return out


# ---------------------------------------------------------------------------


def angle_error_deg(d, origin, endpoint) -> float:
    """Angle between the intended direction and origin->endpoint, degrees.

    Uses the perpendicular component (asin form), which stays accurate for
    the ~1e-11 rad angles this harness measures; an acos of the dot product
    would drown in double rounding.
    """
    v = np.asarray(endpoint, dtype=np.float64) - np.asarray(origin, dtype=np.float64)
    L = float(np.linalg.norm(v))
    if L == 0.0:
        return 0.0
    dd = np.asarray(d, dtype=np.float64)
    dd = dd / np.linalg.norm(dd)
    perp = v - dd * float(np.dot(v, dd))
    s = float(np.linalg.norm(perp)) / L
    return math.degrees(math.asin(min(1.0, s)))


def angle_bound_deg(e0_world: float, length: float) -> float:
    """Worst-case angle: asin(sqrt(2) * (e0/L + 7.5 eps))."""
    if length <= 0.0:
        return 90.0
    arg = math.sqrt(2.0) * (e0_world / length + BOUND_FACTOR * EPS32)
    return math.degrees(math.asin(min(1.0, arg)))


def position_bound(e0_world: float, length: float) -> float:
    return e0_world + BOUND_FACTOR * EPS32 * length


def oracle_endpoint(canvas: Canvas, p0, d32, plane):
    """Exact line/plane intersection for the traversal's final face."""
    axis, depth, j = plane
    half = canvas.config.extent / 2.0
    w = canvas.config.root_size / (1 << depth)
    plane_w = -half + j * w
    dd = (float(d32[0]), float(d32[1]), float(d32[2]))
    t = (plane_w - p0[axis]) / dd[axis]
    return tuple(p0[a] + t * dd[a] for a in range(3))


def analyze_ray(canvas: Canvas, kern, eye, d32, world=False,
                term_t=0.003, max_steps=200_000) -> RayRecord | None:
    entry = kern.ray_entry(eye, d32)
    if entry is None:
        return None
    res = kern.traverse(entry, d32, term_t=term_t, max_steps=max_steps, world=world)
    if res.plane is None or res.length <= 0.0:
        return None
    true_end = oracle_endpoint(canvas, entry.p0, d32, res.plane)
    pos_err = math.dist(res.endpoint, true_end)
    angle = angle_error_deg(d32, entry.p0, res.endpoint)
    e0_world = entry.e0_local * entry.width if not world else entry.e0_world
    bound = angle_bound_deg(e0_world, res.length)
    return RayRecord(
        length=res.length, n=res.n, angle_deg=angle, pos_err=pos_err,
        e0_local=entry.e0_local, e0_world=e0_world, sum_width=res.sum_width,
        bound_deg=bound, violation=angle > bound, aborted=res.aborted,
    )


def analyze_precision(canvas: Canvas, camera: Camera, n_rays: int,
                      world=False, seed=0, term_t=0.003,
                      max_steps=200_000) -> ErrorReport:
    """ErrorReport over n_rays random pixel rays of the camera.

    Rays terminate on opacity like a normal render, so painted content
    spreads path lengths the way real scene content does.  Aborted rays
    (step-cap or corrupt state, which world-coordinate traversal does
    produce) stay in the records with their flag set.
    """
    kern = make_kernel(canvas)
    report = ErrorReport(mode="world" if world else "local")
    rng = np.random.default_rng(seed)
    cam = camera.to_dict()
    W, H = camera.width, camera.height
    made = 0
    attempts = 0
    from ._kernel.pykernel import pixel_direction

    while made < n_rays and attempts < 20 * n_rays + 100:
        attempts += 1
        # subpixel-jittered pixels give a dense fan of directions
        px = float(rng.uniform(0, W))
        py = float(rng.uniform(0, H))
        d64, d32 = pixel_direction(cam, px - 0.5, py - 0.5)
        rec = analyze_ray(canvas, kern, camera.eye, d32, world=world,
                          term_t=term_t, max_steps=max_steps)
        if rec is None:
            report.skipped += 1
            continue
        if rec.aborted:
            report.aborted += 1
        report.records.append(rec)
        made += 1
    return report


def auto_camera(canvas: Canvas, width=64, height=64, fov_y_deg=30.0) -> Camera:
    """Camera aimed through the deepest cell from outside the canvas.

    A practical default for `canvox analyze`: the deepest refinement is
    where precision is interesting.
    """
    depths = canvas.depth_flags[: canvas.high_water] & 0x1F
    live = (canvas.depth_flags[: canvas.high_water] & 0x20) != 0
    depths = np.where(live, depths, 0)
    target_cell = int(np.argmax(depths))
    center, w = canvas.cell_center_width(target_cell)
    half = canvas.config.extent / 2.0
    # approach along -x from outside, slightly off-axis to avoid symmetry
    eye = (-half * 1.5, float(center[1]) + half * 0.05, float(center[2]) + half * 0.03)
    return Camera.look_at(eye, tuple(center), fov_y_deg=fov_y_deg,
                          width=width, height=height)
