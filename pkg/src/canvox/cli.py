"""canvox command line: replay | render | analyze | serve | bench."""

from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from . import __version__
from ._kernel import BACKEND
from .errors import CanvoxError, ParseError, PoolExhausted
from .octree import Canvas, CanvasConfig
from .paint import PaintEngine, Room
from .render import Camera, render_image, write_png, write_ppm
from .snapshot import load_snapshot, save_snapshot


def _vec(text: str):
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected x,y,z")
    return tuple(parts)


def _size(text: str):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError("expected WxH") from None


def room_camera(room: Room, width: int, height: int, fov_deg: float) -> Camera:
    """Deterministic camera preset for a room.

    Looks at the room center from a fixed oblique direction; the distance
    scales with the room diagonal and its suggested viewing scale.
    """
    diag = room.diameter
    dist = max(1.5 * (diag / 2.0) / math.tan(math.radians(fov_deg) / 2.0)
               * room.suggested_scale, 1e-6)
    dirv = np.array([0.35, 0.25, 1.0])
    dirv /= np.linalg.norm(dirv)
    center = np.array(room.center)
    eye = center + dirv * dist
    return Camera.look_at(tuple(eye), tuple(center), fov_y_deg=fov_deg,
                          width=width, height=height)


def camera_from_args(args, rooms) -> Camera:
    w, h = args.size
    if args.room is not None:
        match = [r for r in rooms if r.name == args.room]
        if not match:
            names = ", ".join(r.name for r in rooms) or "(none)"
            raise CanvoxError(f"unknown room {args.room!r}; available: {names}")
        return room_camera(match[0], w, h, args.fov)
    if args.eye is None or args.look is None:
        raise CanvoxError("need --eye and --look (or --room NAME)")
    return Camera.look_at(args.eye, args.look, up=args.up or (0.0, 1.0, 0.0),
                          fov_y_deg=args.fov, width=w, height=h)


def cmd_replay(args) -> int:
    from .script import parse_script, apply_event

    canvas = Canvas(CanvasConfig())
    engine = PaintEngine(canvas, budget_per_frame=args.budget)
    t0 = time.perf_counter()
    failed = None
    try:
        with open(args.script, "r", encoding="utf-8") as f:
            for ev in parse_script(f):
                apply_event(engine, ev)
        engine.drain()
    except (ParseError, PoolExhausted) as e:
        failed = e
    wall = time.perf_counter() - t0
    if failed is None or args.keep_partial:
        save_snapshot(canvas, args.out, rooms=engine.rooms)
    print(f"cells: {canvas.live_count}")
    print(f"pool occupancy: {canvas.occupancy() * 100:.3f}%")
    print(f"wall time: {wall:.3f}s")
    if failed is not None:
        print(f"error: {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_render(args) -> int:
    try:
        canvas, rooms = load_snapshot(args.snapshot)
        camera = camera_from_args(args, rooms)
    except CanvoxError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    img = render_image(canvas, camera)
    if str(args.out).lower().endswith(".png"):
        write_png(img, args.out)
    else:
        write_ppm(img, args.out)
    print(f"wrote {camera.width}x{camera.height} image to {args.out} "
          f"({BACKEND} backend)")
    return 0


def cmd_analyze(args) -> int:
    from .analysis import analyze_precision, auto_camera

    try:
        canvas, rooms = load_snapshot(args.snapshot)
    except CanvoxError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if args.eye is not None and args.look is not None:
        camera = camera_from_args(args, rooms)
    else:
        camera = auto_camera(canvas)
    out = {}
    for mode, world in (("local", False), ("world", True)):
        rep = analyze_precision(canvas, camera, args.rays, world=world,
                                seed=args.seed)
        out[mode] = rep
        suffix = "" if mode == "local" else ".world"
        rep.write_json(str(args.report) + suffix if suffix else args.report)
        if args.csv:
            rep.write_scatter_csv(str(args.csv) + suffix if suffix else args.csv)
        print(f"{mode}: rays={rep.count} max_angle={rep.max_angle_deg:.3e} deg "
              f"violations={rep.violations}")
    return 1 if out["local"].violations > 0 else 0


def cmd_serve(args) -> int:
    import asyncio

    from .service import PaintService

    if args.snapshot:
        canvas, rooms = load_snapshot(args.snapshot)
    else:
        canvas, rooms = Canvas(CanvasConfig()), []
    engine = PaintEngine(canvas)
    for r in rooms:
        engine.add_room(r)
    service = PaintService(engine, frame_size=args.size)
    print(f"canvox serve on ws://{args.host}:{args.port} ({BACKEND} backend)",
          flush=True)
    try:
        asyncio.run(service.run(args.host, args.port))
    except KeyboardInterrupt:
        pass
    return 0


def cmd_bench(args) -> int:
    from .bench import run_benchmark

    run_benchmark(size=args.size, rays=args.rays, depth=args.depth)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="canvox",
                                 description="volumetric octree painting engine")
    ap.add_argument("--version", action="version", version=f"canvox {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("replay", help="apply a stroke script and save a snapshot")
    p.add_argument("script")
    p.add_argument("out")
    p.add_argument("--budget", type=int, default=256,
                   help="adjustment budget per frame event")
    p.add_argument("--keep-partial", action="store_true",
                   help="save the snapshot even when replay fails")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("render", help="render a snapshot to PPM/PNG")
    p.add_argument("snapshot")
    p.add_argument("out")
    _camera_flags(p)
    p.set_defaults(fn=cmd_render)

    p = sub.add_parser("analyze", help="ray-precision error report")
    p.add_argument("snapshot")
    p.add_argument("--rays", type=int, default=10_000)
    p.add_argument("--report", default="canvox-report.json")
    p.add_argument("--csv", default=None)
    p.add_argument("--seed", type=int, default=0)
    _camera_flags(p)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("serve", help="interactive websocket paint service")
    p.add_argument("snapshot", nargs="?", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--size", type=_size, default=(256, 256),
                   help="streamed frame size, WxH")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("bench", help="compare kernel backends")
    p.add_argument("--size", type=_size, default=(128, 128))
    p.add_argument("--rays", type=int, default=2000)
    p.add_argument("--depth", type=int, default=16)
    p.set_defaults(fn=cmd_bench)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except CanvoxError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def _camera_flags(p):
    p.add_argument("--eye", type=_vec, default=None)
    p.add_argument("--look", type=_vec, default=None)
    p.add_argument("--up", type=_vec, default=None)
    p.add_argument("--fov", type=float, default=60.0)
    p.add_argument("--size", type=_size, default=(256, 256))
    p.add_argument("--room", default=None)


if __name__ == "__main__":
    raise SystemExit(main())
