"""Stroke-script parsing, validation, serialization, and replay.

Scripts are UTF-8 JSON-lines.  Record types:

    {"t": 0.0, "type": "brush", "brush": {"shape": "sphere", "radius": 1.0,
        "rgba": [r, g, b, a], "mode": "paint", "pickup_strength": 0.0,
        "noise_seed": 0}}
    {"type": "stroke_begin"}
    {"t": 0.1, "type": "sample", "pos": [x, y, z], "pressure": 1.0, "zoom": 1.0}
    {"type": "stroke_end"}
    {"type": "room", "name": "...", "min": [x, y, z], "max": [x, y, z], "scale": 1.0}
    {"type": "frame"}

Coordinates are meters with the canvas origin at the canvas center.  Fields
out of range are rejected with their line number, never clamped.  ``t`` is
optional; missing sample times fall back to a 90 Hz input clock so replays
stay deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import ParseError
from .paint import MODES, SHAPES, Brush, PaintEngine, Room, StrokeSample

_INPUT_RATE_HZ = 90.0

EVENT_TYPES = ("brush", "stroke_begin", "sample", "stroke_end", "room", "frame")


@dataclass
class ScriptEvent:
    kind: str
    line: int
    brush: Brush | None = None
    sample: StrokeSample | None = None
    room: Room | None = None


def _need(obj, key, line, types, what):
    if key not in obj:
        raise ParseError(line, f"missing field {key!r} in {what}")
    v = obj[key]
    if not isinstance(v, types):
        raise ParseError(line, f"field {key!r} in {what} has wrong type")
    return v


def _vec3(obj, key, line, what):
    v = _need(obj, key, line, list, what)
    if len(v) != 3 or not all(isinstance(x, (int, float)) for x in v):
        raise ParseError(line, f"field {key!r} in {what} must be [x, y, z]")
    if any(not math.isfinite(float(x)) for x in v):
        raise ParseError(line, f"field {key!r} in {what} must be finite")
    return tuple(float(x) for x in v)


def parse_event(obj, line: int, clock: list) -> ScriptEvent:
    if not isinstance(obj, dict):
        raise ParseError(line, "record must be a JSON object")
    kind = obj.get("type")
    if kind not in EVENT_TYPES:
        raise ParseError(line, f"unknown record type {kind!r}")
    if kind == "brush":
        b = _need(obj, "brush", line, dict, "brush record")
        shape = _need(b, "shape", line, str, "brush")
        if shape not in SHAPES:
            raise ParseError(line, f"unknown stamp shape {shape!r}")
        radius = float(_need(b, "radius", line, (int, float), "brush"))
        if radius <= 0:
            raise ParseError(line, "brush radius must be positive")
        rgba = _vec4_color(b, line)
        mode = b.get("mode", "paint")
        if mode not in MODES:
            raise ParseError(line, f"unknown brush mode {mode!r}")
        pickup = float(b.get("pickup_strength", 0.0))
        if not 0.0 <= pickup <= 1.0:
            raise ParseError(line, "pickup_strength out of [0, 1]")
        if mode == "paint" and not (0.0 < rgba[3] <= 1.0):
            raise ParseError(line, "paint mode needs brush alpha in (0, 1]")
        seed = int(b.get("noise_seed", 0))
        brush = Brush(shape=shape, radius=radius, rgba=rgba, mode=mode,
                      pickup_strength=pickup, noise_seed=seed)
        return ScriptEvent("brush", line, brush=brush)
    if kind == "sample":
        pos = _vec3(obj, "pos", line, "sample")
        pressure = float(obj.get("pressure", 1.0))
        if not 0.0 <= pressure <= 1.0:
            raise ParseError(line, f"pressure {pressure} out of [0, 1]")
        zoom = float(obj.get("zoom", 1.0))
        if not zoom > 0.0:
            raise ParseError(line, "zoom must be positive")
        if "t" in obj:
            t = float(obj["t"])
            clock[0] = t
        else:
            clock[0] += 1.0 / _INPUT_RATE_HZ
            t = clock[0]
        return ScriptEvent("sample", line,
                           sample=StrokeSample(time=t, position=pos,
                                               pressure=pressure, zoom=zoom))
    if kind == "room":
        name = _need(obj, "name", line, str, "room")
        lo = _vec3(obj, "min", line, "room")
        hi = _vec3(obj, "max", line, "room")
        if any(a >= b for a, b in zip(lo, hi)):
            raise ParseError(line, "room box must be non-empty")
        scale = float(obj.get("scale", 1.0))
        if scale <= 0:
            raise ParseError(line, "room scale must be positive")
        return ScriptEvent("room", line,
                           room=Room(name=name, box_min=lo, box_max=hi,
                                     suggested_scale=scale))
    return ScriptEvent(kind, line)


def parse_script(stream):
    """Yield ScriptEvents from a line iterable; strict validation."""
    clock = [0.0]
    for lineno, raw in enumerate(stream, start=1):
        text = raw.strip()
        if not text:
            continue
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(lineno, f"invalid JSON: {e.msg}") from None
        yield parse_event(obj, lineno, clock)


def _vec4_color(b, line):
    v = _need(b, "rgba", line, list, "brush")
    if len(v) != 4 or not all(isinstance(x, (int, float)) for x in v):
        raise ParseError(line, "brush rgba must be [r, g, b, a]")
    rgba = tuple(float(x) for x in v)
    if any(not (0.0 <= x <= 1.0) for x in rgba):
        raise ParseError(line, "brush rgba channels out of [0, 1]")
    return rgba


def serialize_event(ev: ScriptEvent) -> dict:
    if ev.kind == "brush":
        b = ev.brush
        return {"t": None, "type": "brush", "brush": {
            "shape": b.shape, "radius": b.radius, "rgba": list(b.rgba),
            "mode": b.mode, "pickup_strength": b.pickup_strength,
            "noise_seed": b.noise_seed}}
    if ev.kind == "sample":
        s = ev.sample
        return {"t": s.time, "type": "sample", "pos": list(s.position),
                "pressure": s.pressure, "zoom": s.zoom}
    if ev.kind == "room":
        r = ev.room
        return {"type": "room", "name": r.name, "min": list(r.box_min),
                "max": list(r.box_max), "scale": r.suggested_scale}
    return {"type": ev.kind}


def serialize_script(events, stream):
    for ev in events:
        obj = serialize_event(ev)
        if obj.get("t", 0) is None:
            del obj["t"]
        stream.write(json.dumps(obj, separators=(",", ":")) + "\n")


def apply_event(engine: PaintEngine, ev) -> None:
    """Apply one parsed event (or raw dict) to a paint engine."""
    if isinstance(ev, dict):
        ev = parse_event(ev, 0, [0.0])
    if ev.kind == "brush":
        engine.set_brush(ev.brush)
    elif ev.kind == "stroke_begin":
        engine.stroke_begin()
    elif ev.kind == "sample":
        engine.add_sample(ev.sample)
    elif ev.kind == "stroke_end":
        engine.stroke_end()
    elif ev.kind == "room":
        engine.add_room(ev.room)
    elif ev.kind == "frame":
        engine.frame()


def apply_events(engine: PaintEngine, events) -> int:
    n = 0
    for ev in events:
        apply_event(engine, ev)
        n += 1
    return n


def replay_file(engine: PaintEngine, path) -> int:
    with open(path, "r", encoding="utf-8") as f:
        return apply_events(engine, parse_script(f))
