"""Interactive paint service: WebSocket JSON control + binary PNG frames.

One asyncio loop owns the engine; messages apply in arrival order, the
adjustment queue ticks at a fixed rate, and each client gets at most one
in-flight rendered frame at its latest camera (stale camera updates
coalesce).  Renders run on pool copies in a thread, so the engine never
mutates under a ray.

Wire protocol (JSON text messages, one binary message per frame):
  client -> server:
    {"type": "hello"}
    {"type": "set_brush", "brush": {...}}           # script brush schema
    {"type": "stroke_begin"} / {"type": "stroke_end"}
    {"type": "stroke_sample", "pos": [x,y,z], "pressure": p, "zoom": z}
    {"type": "set_camera", "eye": [...], "look": [...], "up": [...],
     "fov": deg, "size": [w, h]}
    {"type": "teleport", "room": "name"}
    {"type": "define_room", "name": n, "min": [...], "max": [...], "scale": s}
    {"type": "save", "path": "out.cvox"}
  server -> client:
    {"type": "hello", "config": {...}, "rooms": [...]}
    {"type": "frame", "seq": n}   followed by one binary PNG message
    {"type": "stats", "cells": n, "pool_pct": f, "dirty_blocks": n,
     "last_seq": n}
    {"type": "error", "code": c, "msg": m}
"""

from __future__ import annotations

import asyncio
import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .cli import room_camera
from .errors import CanvoxError, ParseError
from .paint import PaintEngine, Room, StrokeSample
from .render import Camera, png_bytes, render_image
from .script import parse_event
from .snapshot import save_snapshot

logger = logging.getLogger(__name__)

TICK_HZ = 30.0


class _PoolSnapshot:
    """Frozen copy of the pools, enough for the kernels and the renderer."""

    def __init__(self, canvas):
        self.config = canvas.config
        self.parent = canvas.parent.copy()
        self.first_child = canvas.first_child.copy()
        self.depth_flags = canvas.depth_flags.copy()
        self.rgba = canvas.rgba.copy()
        self.neighbor3 = canvas.neighbor3.copy()


@dataclass
class _Client:
    ws: object
    camera: Camera | None = None
    render_pending: bool = False
    render_running: bool = False
    last_seq: int = 0
    samples_seen: int = 0


class PaintService:
    def __init__(self, engine: PaintEngine, frame_size=(256, 256),
                 tick_hz: float = TICK_HZ):
        self.engine = engine
        self.frame_size = frame_size
        self.tick_dt = 1.0 / tick_hz
        self.seq = 0
        self.clients: dict[object, _Client] = {}
        self.state_changed = True
        self.stroke_owner = None
        self._dirty_blocks_seen = 0

    # -- lifecycle ------------------------------------------------------------

    async def run(self, host: str, port: int, ready: asyncio.Event | None = None):
        from websockets.asyncio.server import serve

        async with serve(self._handler, host, port, max_size=32 * 1024 * 1024):
            if ready is not None:
                ready.set()
            await self._tick_loop()

    async def _tick_loop(self):
        while True:
            await asyncio.sleep(self.tick_dt)
            work = self.engine.frame()
            taken = self.engine.canvas.take_dirty_blocks()
            self._dirty_blocks_seen += len(taken)
            if work or taken:
                self.state_changed = True
            if self.state_changed:
                self.state_changed = False
                for client in list(self.clients.values()):
                    self._schedule_render(client)
                await self._broadcast_stats()

    # -- client handling --------------------------------------------------------

    async def _handler(self, ws):
        client = _Client(ws=ws)
        self.clients[ws] = client
        try:
            await self._send(ws, self._hello_msg())
            async for raw in ws:
                if isinstance(raw, bytes):
                    await self._error(ws, 400, "binary messages are server->client only")
                    break
                try:
                    await self._dispatch(client, raw)
                except (CanvoxError, ValueError, KeyError) as e:
                    await self._error(ws, 400, str(e))
        except Exception:
            logger.exception("client connection failed")
        finally:
            if self.stroke_owner is client:
                try:
                    self.engine.stroke_end()
                except ValueError:
                    pass
                self.stroke_owner = None
            self.clients.pop(ws, None)

    def _hello_msg(self):
        cfg = self.engine.canvas.config
        return {
            "type": "hello",
            "config": {
                "root_count_per_axis": cfg.root_count_per_axis,
                "root_size": cfg.root_size,
                "max_depth": cfg.max_depth,
                "extent": cfg.extent,
                "background_rgba": list(cfg.background_rgba),
            },
            "rooms": [
                {"name": r.name, "min": list(r.box_min), "max": list(r.box_max),
                 "scale": r.suggested_scale}
                for r in self.engine.rooms
            ],
        }

    async def _dispatch(self, client: _Client, raw: str):
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ValueError(f"invalid JSON: {e.msg}") from None
        kind = msg.get("type")
        if kind == "hello":
            await self._send(client.ws, self._hello_msg())
        elif kind == "set_brush":
            ev = parse_event({"type": "brush", "brush": msg.get("brush", {})}, 0, [0.0])
            self.engine.set_brush(ev.brush)
        elif kind == "stroke_begin":
            if self.stroke_owner is not None:
                raise CanvoxError("another stroke is active")
            self.engine.stroke_begin()
            self.stroke_owner = client
            client.samples_seen = 0
        elif kind == "stroke_sample":
            if self.stroke_owner is not client:
                raise CanvoxError("no active stroke for this client")
            ev = parse_event({"type": "sample", "pos": msg["pos"],
                              "pressure": msg.get("pressure", 1.0),
                              "zoom": msg.get("zoom", 1.0),
                              **({"t": msg["t"]} if "t" in msg else {})},
                             0, [client.samples_seen / 90.0])
            client.samples_seen += 1
            self.engine.add_sample(ev.sample)
            self.state_changed = True
        elif kind == "stroke_end":
            if self.stroke_owner is not client:
                raise CanvoxError("no active stroke for this client")
            self.engine.stroke_end()
            self.stroke_owner = None
            self.state_changed = True
        elif kind == "set_camera":
            w, h = msg.get("size", self.frame_size)
            client.camera = Camera.look_at(
                tuple(msg["eye"]), tuple(msg["look"]),
                up=tuple(msg.get("up", (0.0, 1.0, 0.0))),
                fov_y_deg=float(msg.get("fov", 60.0)), width=int(w), height=int(h))
            self._schedule_render(client)
            await self._broadcast_stats()
        elif kind == "teleport":
            room = self.engine.room_by_name(str(msg["room"]))
            if room is None:
                names = ", ".join(r.name for r in self.engine.rooms) or "(none)"
                raise CanvoxError(f"unknown room; available: {names}")
            w, h = self.frame_size
            client.camera = room_camera(room, w, h, 60.0)
            self._schedule_render(client)
        elif kind == "define_room":
            ev = parse_event({"type": "room", "name": msg["name"],
                              "min": msg["min"], "max": msg["max"],
                              "scale": msg.get("scale", 1.0)}, 0, [0.0])
            self.engine.add_room(ev.room)
            await self._broadcast_hello()
        elif kind == "save":
            save_snapshot(self.engine.canvas, str(msg["path"]),
                          rooms=self.engine.rooms)
        else:
            raise ValueError(f"unknown message type {kind!r}")

    # -- frames -------------------------------------------------------------------

    def _schedule_render(self, client: _Client):
        if client.camera is None:
            return
        client.render_pending = True
        if not client.render_running:
            asyncio.get_running_loop().create_task(self._render_task(client))

    async def _render_task(self, client: _Client):
        client.render_running = True
        try:
            while client.render_pending and client.ws in self.clients:
                client.render_pending = False
                camera = client.camera  # latest camera wins
                snap = _PoolSnapshot(self.engine.canvas)
                loop = asyncio.get_running_loop()
                img = await loop.run_in_executor(
                    None, lambda: render_image(snap, camera))
                data = png_bytes(img)
                self.seq += 1
                seq = self.seq
                client.last_seq = seq
                try:
                    await self._send(client.ws, {"type": "frame", "seq": seq})
                    await client.ws.send(data)
                except Exception:
                    return
        finally:
            client.render_running = False

    async def _broadcast_stats(self):
        canvas = self.engine.canvas
        for client in list(self.clients.values()):
            msg = {
                "type": "stats",
                "cells": canvas.live_count,
                "pool_pct": canvas.occupancy() * 100.0,
                "dirty_blocks": self._dirty_blocks_seen,
                "last_seq": client.last_seq,
                "samples_echo": client.samples_seen,
            }
            try:
                await self._send(client.ws, msg)
            except Exception:
                pass

    async def _broadcast_hello(self):
        for client in list(self.clients.values()):
            try:
                await self._send(client.ws, self._hello_msg())
            except Exception:
                pass

    async def _send(self, ws, obj):
        await ws.send(json.dumps(obj))

    async def _error(self, ws, code: int, msg: str):
        try:
            await self._send(ws, {"type": "error", "code": code, "msg": msg})
        except Exception:
            pass
