"""Software ray caster over a canvas snapshot.

The traversal itself lives in the kernel backends (cell-local float32
coordinates, see `_kernel/pykernel.py`); this module owns the camera model,
the per-pixel loop, image output, and the operation-level entry points that
tests exercise directly (`cell_exit`, `composite_segment`).

The camera holds its eye in double precision.  Pixel directions are built
and normalized in double, then truncated to float32 once; the float32
direction is the ray for all purposes downstream.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernel import BACKEND, make_kernel
from ._kernel.pykernel import pixel_direction
from .errors import TraversalAbort
from .octree import Canvas

F = np.float32

DEFAULT_TERM_T = 0.003
DEFAULT_STEP_CAP = 1_000_000


@dataclass
class Camera:
    """Pinhole camera; eye in canvas coordinates, double precision."""

    eye: tuple
    forward: tuple
    up: tuple
    right: tuple
    fov_y: float  # radians
    width: int
    height: int

    def __post_init__(self):
        if not (0.0 < self.fov_y < math.pi):
            raise ValueError("fov_y must be in (0, pi)")
        m = np.array([self.right, self.up, self.forward], dtype=np.float64)
        if not np.allclose(m @ m.T, np.eye(3), atol=1e-12):
            raise ValueError("camera basis must be orthonormal")

    @classmethod
    def look_at(cls, eye, look, up=(0.0, 1.0, 0.0), fov_y_deg=60.0,
                width=256, height=256) -> "Camera":
        eye = np.asarray(eye, dtype=np.float64)
        fw = np.asarray(look, dtype=np.float64) - eye
        n = np.linalg.norm(fw)
        if n == 0:
            raise ValueError("look point coincides with eye")
        fw /= n
        upv = np.asarray(up, dtype=np.float64)
        right = np.cross(fw, upv)
        rn = np.linalg.norm(right)
        if rn < 1e-12:
            upv = np.array([0.0, 0.0, 1.0]) if abs(fw[1]) > 0.9 else np.array([0.0, 1.0, 0.0])
            right = np.cross(fw, upv)
            rn = np.linalg.norm(right)
        right /= rn
        true_up = np.cross(right, fw)
        return cls(eye=tuple(eye), forward=tuple(fw), up=tuple(true_up),
                   right=tuple(right), fov_y=math.radians(fov_y_deg),
                   width=int(width), height=int(height))

    def to_dict(self, background=(0.0, 0.0, 0.0, 1.0)) -> dict:
        return {
            "eye": tuple(self.eye),
            "right": tuple(self.right),
            "up": tuple(self.up),
            "forward": tuple(self.forward),
            "tan_half_fov": math.tan(self.fov_y / 2.0),
            "width": self.width,
            "height": self.height,
            "background": tuple(background),
        }

    def pixel_ray(self, px: int, py: int):
        """(d64, d32) unit direction through the pixel center."""
        return pixel_direction(self.to_dict(), px, py)


# ---------------------------------------------------------------------------
# operation-level pieces (float32 step semantics identical to the kernels)


def cell_exit(p, d):
    """Exit distance and face from a cell-local point along a direction.

    Returns (t, (axis, sign)); ties pick the lowest axis.  Raises
    TraversalAbort when the state is corrupt (negative t).
    """
    p = [F(v) for v in p]
    d = [F(v) for v in d]
    t = F(np.inf)
    axis = -1
    for a in range(3):
        if d[a] != F(0.0):
            lim = F(0.5) if d[a] > 0 else F(-0.5)
            ta = (lim - p[a]) / d[a]
            if ta < t:
                t = ta
                axis = a
    if axis < 0:
        raise TraversalAbort("direction has no nonzero component")
    if t < 0:
        raise TraversalAbort(f"negative exit distance {float(t)}")
    return float(t), (axis, 1 if d[axis] > 0 else -1)


def composite_segment(rgb, transmittance, leaf_rgba, t):
    """Front-to-back compositing across one cell-local segment.

    Opacity is interpreted per full crossing of the leaf's own width:
    segment transmittance (1 - alpha)^t.  Returns (rgb, transmittance).
    """
    alpha = F(leaf_rgba[3])
    t = F(t)
    if alpha <= F(0.0) or t <= F(0.0):
        return tuple(rgb), float(transmittance)
    T = F(transmittance)
    ts = F(math.pow(float(F(1.0) - alpha), float(t)))
    k = T * (F(1.0) - ts)
    out = (
        F(rgb[0]) + k * F(leaf_rgba[0]),
        F(rgb[1]) + k * F(leaf_rgba[1]),
        F(rgb[2]) + k * F(leaf_rgba[2]),
    )
    return tuple(float(v) for v in out), float(T * ts)


# ---------------------------------------------------------------------------
# per-ray and full-image casting


def ray_entry(canvas: Canvas, camera: Camera, px: int, py: int):
    """EntryState for a pixel ray, or None when the ray misses the canvas."""
    kern = make_kernel(canvas)
    d64, d32 = camera.pixel_ray(px, py)
    return kern.ray_entry(camera.eye, d32), d32


def cast_ray(canvas: Canvas, camera: Camera, px: int, py: int,
             background=None, kern=None, world=False,
             term_t=DEFAULT_TERM_T, max_steps=DEFAULT_STEP_CAP):
    """Color of one pixel, plus the raw RayResult (None when missed)."""
    if background is None:
        background = canvas.config.background_rgba
    if kern is None:
        kern = make_kernel(canvas)
    d64, d32 = camera.pixel_ray(px, py)
    entry = kern.ray_entry(camera.eye, d32)
    bg = tuple(F(v) for v in background)
    if entry is None:
        return (float(bg[0]), float(bg[1]), float(bg[2]), float(bg[3])), None
    res = kern.traverse(entry, d32, term_t=term_t, max_steps=max_steps,
                        world=world)
    T = F(res.transmittance)
    rgba = (
        float(F(res.rgb[0]) + T * bg[0]),
        float(F(res.rgb[1]) + T * bg[1]),
        float(F(res.rgb[2]) + T * bg[2]),
        float(F(1.0) - T * (F(1.0) - bg[3])),
    )
    return rgba, res


def world_coordinate_traversal(canvas: Canvas, camera: Camera, px: int, py: int,
                               **kw):
    """Drift baseline: same cast but float32 world coordinates throughout."""
    return cast_ray(canvas, camera, px, py, world=True, **kw)


def render_threads() -> int:
    try:
        n = int(os.environ.get("CANVOX_THREADS", "0"))
    except ValueError:
        n = 0
    if n <= 0:
        n = min(os.cpu_count() or 1, 8)
    return n


def render_image(canvas: Canvas, camera: Camera, background=None,
                 term_t=DEFAULT_TERM_T, max_steps=DEFAULT_STEP_CAP) -> np.ndarray:
    """(H, W, 4) float32 image, one ray per pixel, rows in parallel."""
    if background is None:
        background = canvas.config.background_rgba
    kern = make_kernel(canvas)
    cam = camera.to_dict(background)
    img = np.empty((camera.height, camera.width, 4), dtype=np.float32)
    threads = render_threads() if BACKEND == "compiled" else 1
    if threads <= 1 or camera.height < 2 * threads:
        kern.render_rows(cam, img, 0, camera.height, term_t, max_steps)
        return img
    rows = np.linspace(0, camera.height, threads + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futs = [
            pool.submit(kern.render_rows, cam, img, int(y0), int(y1), term_t, max_steps)
            for y0, y1 in zip(rows[:-1], rows[1:])
            if y1 > y0
        ]
        for f in futs:
            f.result()
    return img


# ---------------------------------------------------------------------------
# image output


def to_u8(img: np.ndarray) -> np.ndarray:
    return (np.clip(img[..., :3], 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_ppm(img: np.ndarray, path):
    """Binary PPM (P6, 8-bit)."""
    u8 = to_u8(img)
    h, w = u8.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(u8.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h = (int(v) for v in parts[1].split())
    raw = parts[3][: w * h * 3]
    return np.frombuffer(raw, dtype=np.uint8).reshape(h, w, 3)


def write_png(img: np.ndarray, path):
    from PIL import Image

    Image.fromarray(to_u8(img), mode="RGB").save(path, format="PNG")


def png_bytes(img: np.ndarray) -> bytes:
    import io

    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(to_u8(img), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()
