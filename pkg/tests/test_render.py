import numpy as np
import pytest

from canvox.octree import Canvas
from canvox.paint import Brush, StampGeom, apply_stamp
from canvox.render import (
    Camera,
    cast_ray,
    ray_entry,
    read_ppm,
    render_image,
    world_coordinate_traversal,
    write_ppm,
)

from util import random_tree, small_config


def test_camera_validation():
    with pytest.raises(ValueError):
        Camera.look_at((0, 0, 0), (0, 0, 0))
    with pytest.raises(ValueError):
        Camera.look_at((0, 0, 0), (1, 0, 0), fov_y_deg=0.0)
    cam = Camera.look_at((0, 0, -10), (0, 0, 0))
    m = np.array([cam.right, cam.up, cam.forward])
    assert np.allclose(m @ m.T, np.eye(3), atol=1e-12)


def test_empty_canvas_renders_background():
    cv = Canvas(small_config(background_rgba=(0.1, 0.2, 0.3, 1.0)))
    cam = Camera.look_at((-60000.0, 0.0, 0.0), (0.0, 0.0, 0.0),
                         fov_y_deg=50.0, width=16, height=16)
    img = render_image(cv, cam)
    assert np.allclose(img[..., :3], [0.1, 0.2, 0.3], atol=1e-6)


def test_single_opaque_root_color():
    cv = Canvas(small_config(root_count_per_axis=1, root_size=100.0, max_depth=4))
    cv.rgba[0] = (0.7, 0.2, 0.5, 1.0)
    cam = Camera.look_at((-300.0, 0.0, 0.0), (0.0, 0.0, 0.0),
                         fov_y_deg=10.0, width=8, height=8)
    rgba, res = cast_ray(cv, cam, 4, 4)
    assert res is not None and res.n >= 1
    assert rgba[:3] == pytest.approx((0.7, 0.2, 0.5), abs=1e-6)


def test_one_pixel_image_equals_cast_ray():
    cv = random_tree(2, target_cells=1500, max_depth=5)
    apply_stamp(cv, Brush(radius=9000.0, rgba=(0.4, 0.5, 0.6, 0.5)),
                StampGeom("sphere", (0.0, 0.0, 0.0), 9000.0))
    cam = Camera.look_at((-30000.0, 500.0, -700.0), (0.0, 0.0, 0.0),
                         fov_y_deg=30.0, width=1, height=1)
    img = render_image(cv, cam)
    rgba, _ = cast_ray(cv, cam, 0, 0)
    assert tuple(img[0, 0]) == pytest.approx(rgba, abs=0)


def test_render_deterministic():
    cv = random_tree(4, target_cells=2000, max_depth=6)
    apply_stamp(cv, Brush(radius=7000.0, rgba=(0.9, 0.3, 0.1, 0.3)),
                StampGeom("sphere", (1000.0, 0.0, 0.0), 7000.0))
    cam = Camera.look_at((-32000.0, 1500.0, 2500.0), (0.0, 0.0, 0.0),
                         fov_y_deg=45.0, width=40, height=32)
    img1 = render_image(cv, cam)
    img2 = render_image(cv, cam)
    assert np.array_equal(img1, img2)


def test_transmittance_monotone_and_rgb_in_range():
    from canvox._kernel import make_kernel
    from canvox._kernel.pykernel import pixel_direction

    cv = random_tree(8, target_cells=2500, max_depth=6)
    rng = np.random.default_rng(0)
    n = cv.high_water
    cv.rgba[:n] = rng.uniform(0, 1, size=(n, 4)).astype(np.float32)
    cam = Camera.look_at((-35000.0, 0.0, 0.0), (0.0, 0.0, 0.0),
                         fov_y_deg=40.0, width=24, height=24)
    kern = make_kernel(cv)
    cd = cam.to_dict()
    for py in range(0, 24, 3):
        for px in range(0, 24, 3):
            _, d32 = pixel_direction(cd, px, py)
            entry = kern.ray_entry(cam.eye, d32)
            if entry is None:
                continue
            res = kern.traverse(entry, d32)
            assert 0.0 <= res.transmittance <= 1.0
            assert all(0.0 <= c <= 1.0 + 1e-5 for c in res.rgb)


def test_ray_entry_op_surface():
    cv = Canvas(small_config())
    cam = Camera.look_at((-60000.0, 0.0, 0.0), (0.0, 0.0, 0.0),
                         fov_y_deg=20.0, width=9, height=9)
    entry, d32 = ray_entry(cv, cam, 4, 4)
    assert entry is not None
    assert float(entry.p[0]) == -0.5
    # a camera looking away misses
    cam2 = Camera.look_at((-60000.0, 0.0, 0.0), (-70000.0, 0.0, 0.0),
                          fov_y_deg=20.0, width=9, height=9)
    entry2, _ = ray_entry(cv, cam2, 4, 4)
    assert entry2 is None


def test_world_traversal_matches_local_on_coarse_center():
    # near the origin on a coarse tree both modes agree to float precision
    cv = Canvas(small_config(root_count_per_axis=2, root_size=16.0, max_depth=4))
    apply_stamp(cv, Brush(radius=10.0, rgba=(0.3, 0.8, 0.2, 0.6)),
                StampGeom("sphere", (0.0, 0.0, 0.0), 10.0))
    cam = Camera.look_at((-40.0, 1.0, 2.0), (0.0, 0.0, 0.0),
                         fov_y_deg=30.0, width=8, height=8)
    for py in range(8):
        for px in range(8):
            a, _ = cast_ray(cv, cam, px, py)
            b, _ = world_coordinate_traversal(cv, cam, px, py)
            assert a == pytest.approx(b, abs=1e-5)


def test_ppm_roundtrip(tmp_path):
    img = np.random.default_rng(0).uniform(0, 1, size=(5, 7, 4)).astype(np.float32)
    path = tmp_path / "img.ppm"
    write_ppm(img, path)
    back = read_ppm(path)
    assert back.shape == (5, 7, 3)
    want = (np.clip(img[..., :3], 0, 1) * 255 + 0.5).astype(np.uint8)
    assert np.array_equal(back, want)


def test_render_threads_env(monkeypatch):
    from canvox.render import render_threads

    monkeypatch.setenv("CANVOX_THREADS", "3")
    assert render_threads() == 3
    monkeypatch.setenv("CANVOX_THREADS", "junk")
    assert render_threads() >= 1
