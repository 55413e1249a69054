"""Canvas snapshot files (.cvox).

Little-endian binary.  The 64-byte header is:

    offset  size  field
    0       5     magic "CVOX1"
    5       1     version (u8, currently 1)
    6       2     flags (u16): bit 0 = neighbor pool present
    8       4     root_count_per_axis (u32)
    12      8     root_size (f64, meters)
    20      4     max_depth (u32)
    24      16    background_rgba (4 x f32)
    40      4     detail_falloff (f32)
    44      4     detail_min_depth (u32)
    48      4     block_size (u32)
    52      8     pool_capacity (u64)
    60      4     cell_count (u32): pool entries stored (the high-water mark)

Pools follow dense up to cell_count, in order: parent (u32), first_child
(u32), depth_flags (u8), rgba (4 x f32), neighbor3 (3 x u32, only when flag
bit 0 is set).  Then rooms: count (u32), each as name_len (u16) + utf-8 name
+ 6 x f64 box + f64 suggested_scale.

Liveness is the flag bit inside depth_flags, so freed groups ship as dead
entries and indices stay valid; the free list is rebuilt on load in
ascending order (its order is not preserved, the reuse policy is).
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import BadMagic, InvariantViolation, TruncatedFile, VersionMismatch
from .octree import LIVE_BIT, NONE, Canvas, CanvasConfig
from .paint import Room

MAGIC = b"CVOX1"
VERSION = 1
FLAG_NEIGHBORS = 1

_HEADER = struct.Struct("<5sBHId I 4f f I I Q I".replace(" ", ""))
HEADER_SIZE = 64


def _pack_header(canvas: Canvas, flags: int) -> bytes:
    cfg = canvas.config
    data = _HEADER.pack(
        MAGIC, VERSION, flags,
        cfg.root_count_per_axis, cfg.root_size, cfg.max_depth,
        *[float(c) for c in cfg.background_rgba],
        cfg.detail_falloff, cfg.detail_min_depth, cfg.block_size,
        cfg.pool_capacity, canvas.high_water,
    )
    assert len(data) == HEADER_SIZE, len(data)
    return data


def save_snapshot(canvas: Canvas, path, rooms=(), with_neighbors=True):
    """Write the canvas (and rooms) to a .cvox file."""
    n = canvas.high_water
    flags = FLAG_NEIGHBORS if with_neighbors else 0
    with open(path, "wb") as f:
        f.write(_pack_header(canvas, flags))
        f.write(canvas.parent[:n].tobytes())
        f.write(canvas.first_child[:n].tobytes())
        f.write(canvas.depth_flags[:n].tobytes())
        f.write(canvas.rgba[:n].tobytes())
        if with_neighbors:
            f.write(canvas.neighbor3[:n].tobytes())
        f.write(struct.pack("<I", len(rooms)))
        for r in rooms:
            name = r.name.encode("utf-8")
            f.write(struct.pack("<H", len(name)))
            f.write(name)
            f.write(struct.pack("<6d", *r.box_min, *r.box_max))
            f.write(struct.pack("<d", r.suggested_scale))


def _take(buf: memoryview, size: int, what: str) -> memoryview:
    if len(buf) < size:
        raise TruncatedFile(f"file ends inside {what}")
    return buf[:size]


def load_snapshot(path):
    """Read a .cvox file; returns (canvas, rooms).

    The stored neighbor pool is used when present, rebuilt otherwise.  The
    loaded tree is structurally validated before it is returned.
    """
    with open(path, "rb") as f:
        raw = f.read()
    buf = memoryview(raw)
    head = _take(buf, HEADER_SIZE, "header")
    magic = bytes(head[:5])
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    (magic, version, flags, r_axis, root_size, max_depth,
     bg0, bg1, bg2, bg3, falloff, min_depth, block_size, capacity,
     cell_count) = _HEADER.unpack(head)
    if version != VERSION:
        raise VersionMismatch(f"snapshot version {version}, expected {VERSION}")
    buf = buf[HEADER_SIZE:]

    cfg = CanvasConfig(
        root_count_per_axis=r_axis, root_size=root_size, max_depth=max_depth,
        background_rgba=(bg0, bg1, bg2, bg3), detail_falloff=falloff,
        detail_min_depth=min_depth, block_size=block_size,
        pool_capacity=capacity,
    )
    canvas = Canvas(cfg)
    if cell_count < canvas.root_count:
        raise InvariantViolation("cell_count smaller than the root array")
    if cell_count > canvas.capacity:
        canvas._grow(cell_count)

    def read_array(dtype, per_cell, what):
        nonlocal buf
        nbytes = cell_count * np.dtype(dtype).itemsize * per_cell
        chunk = _take(buf, nbytes, what)
        buf = buf[nbytes:]
        arr = np.frombuffer(chunk, dtype=dtype)
        return arr.reshape(cell_count, per_cell) if per_cell > 1 else arr

    canvas.parent[:cell_count] = read_array(np.uint32, 1, "parent pool")
    canvas.first_child[:cell_count] = read_array(np.uint32, 1, "child pool")
    canvas.depth_flags[:cell_count] = read_array(np.uint8, 1, "flag pool")
    canvas.rgba[:cell_count] = read_array(np.float32, 4, "color pool")
    has_neighbors = bool(flags & FLAG_NEIGHBORS)
    if has_neighbors:
        canvas.neighbor3[:cell_count] = read_array(np.uint32, 3, "neighbor pool")
    canvas.high_water = cell_count

    rooms = []
    count_raw = _take(buf, 4, "room count")
    (room_count,) = struct.unpack("<I", count_raw)
    buf = buf[4:]
    for _ in range(room_count):
        (nlen,) = struct.unpack("<H", _take(buf, 2, "room name length"))
        buf = buf[2:]
        name = bytes(_take(buf, nlen, "room name")).decode("utf-8")
        buf = buf[nlen:]
        vals = struct.unpack("<7d", _take(buf, 56, "room box"))
        buf = buf[56:]
        rooms.append(Room(name=name, box_min=vals[0:3], box_max=vals[3:6],
                          suggested_scale=vals[6]))

    _rebuild_free_list(canvas)
    _validate_loaded(canvas)
    if not has_neighbors:
        canvas.rebuild_all_neighbors()
    canvas.mark_dirty_range(0, max(canvas.high_water, 1))
    return canvas, rooms


def _rebuild_free_list(canvas: Canvas):
    n = canvas.high_water
    live = (canvas.depth_flags[:n] & LIVE_BIT) != 0
    canvas.live_count = int(live.sum())
    canvas.free_head = NONE
    canvas._free_count = 0
    dead_bases = [
        b for b in range(canvas.root_count, n, 8) if not live[b]
    ]
    # thread in descending order so the list ends up ascending
    prev = NONE
    for b in reversed(dead_bases):
        canvas.first_child[b] = prev
        prev = b
        canvas._free_count += 1
    canvas.free_head = prev


def _validate_loaded(canvas: Canvas):
    try:
        canvas.validate()
    except AssertionError as e:
        raise InvariantViolation(f"loaded tree fails structural checks: {e}") from None
