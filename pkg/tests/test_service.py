"""WebSocket paint-service integration tests."""

import asyncio
import json
import socket
import threading

import pytest

from canvox.octree import Canvas, CanvasConfig
from canvox.paint import PaintEngine, Room
from canvox.service import PaintService


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


class ServiceThread:
    """Run a PaintService on its own asyncio loop for a test."""

    def __init__(self, engine, frame_size=(32, 32), tick_hz=60.0):
        self.service = PaintService(engine, frame_size=frame_size, tick_hz=tick_hz)
        self.port = free_port()
        self.loop = asyncio.new_event_loop()
        self._ready = threading.Event()
        self.thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        asyncio.set_event_loop(self.loop)
        ready = asyncio.Event()

        async def runner():
            task = asyncio.create_task(
                self.service.run("127.0.0.1", self.port, ready=ready))
            await ready.wait()
            self._ready.set()
            await task

        try:
            self.loop.run_until_complete(runner())
        except asyncio.CancelledError:
            pass
        except Exception:
            self._ready.set()
            raise

    def __enter__(self):
        self.thread.start()
        assert self._ready.wait(10), "service failed to start"
        return self

    def __exit__(self, *exc):
        self.loop.call_soon_threadsafe(
            lambda: [t.cancel() for t in asyncio.all_tasks(self.loop)])
        self.thread.join(timeout=5)
        if not self.loop.is_closed():
            self.loop.close()


def small_engine():
    cfg = CanvasConfig(root_count_per_axis=2, root_size=16.0, max_depth=6)
    engine = PaintEngine(Canvas(cfg))
    engine.add_room(Room("left", (-12.0, -4.0, -4.0), (-4.0, 4.0, 4.0), 1.0))
    engine.add_room(Room("right", (4.0, -4.0, -4.0), (12.0, 4.0, 4.0), 1.0))
    return engine


async def _recv_until(ws, kind, timeout=10.0):
    """Collect messages until one of ``kind`` arrives; returns (msg, others)."""
    others = []

    async def inner():
        while True:
            raw = await ws.recv()
            if isinstance(raw, bytes):
                others.append(("binary", raw))
                continue
            msg = json.loads(raw)
            if msg["type"] == kind:
                return msg, others
            others.append((msg["type"], msg))

    return await asyncio.wait_for(inner(), timeout)


async def _next_frame(ws, timeout=10.0):
    """Wait for a frame header + its binary PNG; returns (seq, png_bytes)."""

    async def inner():
        seq = None
        while True:
            raw = await ws.recv()
            if isinstance(raw, bytes):
                if seq is not None:
                    return seq, raw
                continue
            msg = json.loads(raw)
            if msg["type"] == "frame":
                seq = msg["seq"]

    return await asyncio.wait_for(inner(), timeout)


def test_hello_and_rooms():
    import websockets

    engine = small_engine()
    with ServiceThread(engine) as st:
        async def client():
            async with websockets.connect(f"ws://127.0.0.1:{st.port}") as ws:
                msg, _ = await _recv_until(ws, "hello")
                assert msg["config"]["root_count_per_axis"] == 2
                assert [r["name"] for r in msg["rooms"]] == ["left", "right"]

        asyncio.run(client())


def test_stroke_produces_changing_frames_and_teleport():
    import websockets
    from PIL import Image
    import io as _io

    engine = small_engine()
    with ServiceThread(engine) as st:
        async def client():
            async with websockets.connect(f"ws://127.0.0.1:{st.port}",
                                          max_size=32 * 1024 * 1024) as ws:
                await _recv_until(ws, "hello")
                await ws.send(json.dumps({
                    "type": "set_camera", "eye": [-40, 2, 3], "look": [0, 0, 0],
                    "fov": 40, "size": [32, 32]}))
                seq0, png0 = await _next_frame(ws)
                await ws.send(json.dumps({"type": "set_brush", "brush": {
                    "shape": "sphere", "radius": 4.0,
                    "rgba": [0.9, 0.2, 0.1, 0.9]}}))
                await ws.send(json.dumps({"type": "stroke_begin"}))
                await ws.send(json.dumps({"type": "stroke_sample",
                                          "pos": [0, 0, 0], "pressure": 1.0,
                                          "zoom": 1.0}))
                await ws.send(json.dumps({"type": "stroke_end"}))
                seq1, png1 = await _next_frame(ws)
                assert seq1 > seq0
                a = Image.open(_io.BytesIO(png0)).convert("RGB")
                b = Image.open(_io.BytesIO(png1)).convert("RGB")
                assert a.size == (32, 32)
                assert a.tobytes() != b.tobytes()  # paint visible
                # teleport to a room: another frame arrives
                await ws.send(json.dumps({"type": "teleport", "room": "left"}))
                seq2, _ = await _next_frame(ws)
                assert seq2 > seq1
                # unknown room -> error message, connection stays up
                await ws.send(json.dumps({"type": "teleport", "room": "zzz"}))
                msg, _ = await _recv_until(ws, "error")
                assert "left" in msg["msg"]

        asyncio.run(client())


def test_two_clients_both_receive_frames():
    import websockets

    engine = small_engine()
    with ServiceThread(engine) as st:
        async def client():
            url = f"ws://127.0.0.1:{st.port}"
            kw = dict(max_size=32 * 1024 * 1024)
            async with websockets.connect(url, **kw) as w1, \
                    websockets.connect(url, **kw) as w2:
                await _recv_until(w1, "hello")
                await _recv_until(w2, "hello")
                cam = {"type": "set_camera", "eye": [-40, 0, 0],
                       "look": [0, 0, 0], "fov": 40, "size": [32, 32]}
                await w1.send(json.dumps(cam))
                await w2.send(json.dumps(cam))
                s1a, _ = await _next_frame(w1)
                s2a, _ = await _next_frame(w2)
                # painter on w1; both clients get updated frames
                await w1.send(json.dumps({"type": "set_brush", "brush": {
                    "shape": "box", "radius": 5.0, "rgba": [0.1, 0.9, 0.2, 1.0]}}))
                await w1.send(json.dumps({"type": "stroke_begin"}))
                await w1.send(json.dumps({"type": "stroke_sample",
                                          "pos": [2, 1, 0], "pressure": 1.0,
                                          "zoom": 1.0}))
                await w1.send(json.dumps({"type": "stroke_end"}))
                s1b, _ = await _next_frame(w1)
                s2b, _ = await _next_frame(w2)
                assert s1b > s1a and s2b > s2a

        asyncio.run(client())


def test_sample_order_echoed_in_stats():
    import websockets

    engine = small_engine()
    with ServiceThread(engine) as st:
        async def client():
            async with websockets.connect(f"ws://127.0.0.1:{st.port}",
                                          max_size=32 * 1024 * 1024) as ws:
                await _recv_until(ws, "hello")
                await ws.send(json.dumps({"type": "set_brush", "brush": {
                    "shape": "sphere", "radius": 2.0,
                    "rgba": [0.5, 0.5, 0.9, 0.8]}}))
                await ws.send(json.dumps({"type": "stroke_begin"}))
                n = 7
                for i in range(n):
                    await ws.send(json.dumps({
                        "type": "stroke_sample", "pos": [i * 0.5, 0, 0],
                        "pressure": 1.0, "zoom": 1.0}))
                await ws.send(json.dumps({"type": "stroke_end"}))
                # stats eventually echo all samples, in order
                async def all_echoed():
                    while True:
                        msg, _ = await _recv_until(ws, "stats")
                        if msg["samples_echo"] == n:
                            return
                await asyncio.wait_for(all_echoed(), 10)
                assert engine.canvas.live_count > engine.canvas.root_count

        asyncio.run(client())


def test_save_roundtrip(tmp_path):
    import websockets
    from canvox.snapshot import load_snapshot

    engine = small_engine()
    with ServiceThread(engine) as st:
        async def client():
            async with websockets.connect(f"ws://127.0.0.1:{st.port}") as ws:
                await _recv_until(ws, "hello")
                path = tmp_path / "served.cvox"
                await ws.send(json.dumps({"type": "save", "path": str(path)}))
                async def wait_file():
                    while not path.exists():
                        await asyncio.sleep(0.05)
                await asyncio.wait_for(wait_file(), 10)
                await asyncio.sleep(0.2)
                cv, rooms = load_snapshot(path)
                assert [r.name for r in rooms] == ["left", "right"]

        asyncio.run(client())
