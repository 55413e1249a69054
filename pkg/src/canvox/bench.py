"""Backend benchmark: compiled extension vs. pure-Python kernel.

Renders a small frame of the deep test scene and runs a batch of analysis
rays through both kernels, printing wall times and the speedup.  Invoked as
`canvox bench` or `python -m canvox.bench`.
"""

from __future__ import annotations

import time

import numpy as np

from ._kernel import available_backends, get_kernel_class
from ._kernel.pykernel import pixel_direction
from .analysis import analyze_ray
from .octree import CanvasConfig
from .render import Camera
from .scene import make_deep_scene


def _time_render(kernel, cam_dict, width, height):
    img = np.empty((height, width, 4), dtype=np.float32)
    t0 = time.perf_counter()
    kernel.render_rows(cam_dict, img, 0, height)
    return time.perf_counter() - t0, img


def _time_rays(canvas, kernel, camera, n_rays):
    cam = camera.to_dict()
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    done = 0
    steps = 0
    for _ in range(n_rays):
        px = float(rng.uniform(0, camera.width))
        py = float(rng.uniform(0, camera.height))
        _, d32 = pixel_direction(cam, px - 0.5, py - 0.5)
        rec = analyze_ray(canvas, kernel, camera.eye, d32)
        if rec is not None:
            done += 1
            steps += rec.n
    return time.perf_counter() - t0, done, steps


def run_benchmark(size=(128, 128), rays=2000, depth=16):
    print(f"building deep scene (cascade depth {depth})...")
    canvas, focus = make_deep_scene(
        CanvasConfig(max_depth=max(depth, 1)), depth=depth, paint_alpha=0.35)
    half = canvas.config.extent / 2.0
    camera = Camera.look_at((-1.4 * half, 0.21 * half, 0.13 * half), focus,
                            fov_y_deg=2.0, width=size[0], height=size[1])
    print(f"scene: {canvas.live_count} cells; frame {size[0]}x{size[1]}; "
          f"{rays} analysis rays\n")
    results = {}
    backends = available_backends()
    # scale the python workload down; it is orders of magnitude slower
    py_scale = 16
    for backend in backends:
        kern = get_kernel_class(backend).for_canvas(canvas)
        w, h = size
        nr = rays
        if backend == "python":
            w, h = max(w // py_scale, 8), max(h // py_scale, 8)
            nr = max(rays // py_scale, 16)
        cam = Camera.look_at((-1.4 * half, 0.21 * half, 0.13 * half), focus,
                             fov_y_deg=2.0, width=w, height=h)
        t_render, _ = _time_render(kern, cam.to_dict(), w, h)
        t_rays, done, steps = _time_rays(canvas, kern, cam, nr)
        per_px = t_render / (w * h)
        per_ray = t_rays / max(done, 1)
        results[backend] = (per_px, per_ray)
        print(f"{backend:>9}: render {w}x{h} in {t_render:.3f}s "
              f"({per_px * 1e6:.1f} us/pixel); "
              f"{done} analysis rays in {t_rays:.3f}s "
              f"({per_ray * 1e6:.1f} us/ray, ~{steps // max(done, 1)} cells/ray)")
    if len(results) == 2:
        c, p = results["compiled"], results["python"]
        print(f"\nspeedup: {p[0] / c[0]:.0f}x per pixel, {p[1] / c[1]:.0f}x per ray")
    return results


if __name__ == "__main__":
    run_benchmark()
