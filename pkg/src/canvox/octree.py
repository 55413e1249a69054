"""Index-pool octree canvas.

The canvas is an array of deep octrees: a fixed grid of root cells, each
refinable down to a configured maximum depth.  Cells live in parallel linear
pools indexed by one 32-bit cell index:

    parent[i]       parent cell (roots point at themselves)
    first_child[i]  base index of the 8-child group, or NONE for leaves
    depth_flags[i]  packed depth (5 bits) + live bit
    rgba[i]         float32 color, channels in [0, 1]
    neighbor3[i]    one stored face neighbor per axis (see below)

Children are always allocated in groups of eight consecutive indices, so a
cell's seven siblings follow from its own index.  Child slot within a group
is ``bx + 2*by + 4*bz`` where bit ``b`` selects the -/+ half along each axis.
The root array occupies indices ``[0, R^3)`` and is never freed.

Stored-neighbor convention: along each axis exactly one of the two face
neighbors does not share the cell's parent (direction -axis when the cell's
offset bit is 0, +axis when it is 1; roots use grid parity the same way).
Only that neighbor is stored; the opposite one is plain sibling index
arithmetic.  The stored entry is the deepest allocated cell at the mirrored
location whose depth does not exceed the cell's own depth, or NONE at the
canvas boundary.

Freed groups form a free list threaded through ``first_child`` and sorted by
base index, so allocation always reuses the lowest recycled group first and
the pool stays populated from the beginning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChildrenNotLeaves,
    MaxDepthExceeded,
    OutOfCanvas,
    PoolExhausted,
)

NONE = 0xFFFFFFFF

DEPTH_MASK = 0x1F
LIVE_BIT = 0x20

_INITIAL_CAPACITY = 1 << 16


@dataclass
class CanvasConfig:
    """Geometry and budget parameters of a canvas.

    Defaults give a 40 km canvas (4 roots of 10 km per axis) with leaves of
    about 0.6 mm at depth 24.  ``detail_falloff`` and ``detail_min_depth``
    drive room-based depth limiting, see ``paint.effective_max_depth``.
    """

    root_count_per_axis: int = 4
    root_size: float = 10_000.0
    max_depth: int = 24
    background_rgba: tuple = (0.0, 0.0, 0.0, 1.0)
    detail_falloff: float = 1.0
    detail_min_depth: int = 4
    block_size: int = 4096
    pool_capacity: int = 32 * 1024 * 1024

    def __post_init__(self):
        if self.root_count_per_axis < 1:
            raise ValueError("root_count_per_axis must be >= 1")
        if not (1 <= self.max_depth <= 30):
            raise ValueError("max_depth must be in [1, 30]")
        if self.root_size <= 0:
            raise ValueError("root_size must be positive")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")

    @property
    def extent(self) -> float:
        """Canvas width per axis, in meters."""
        return self.root_count_per_axis * self.root_size

    def cell_width(self, depth: int) -> float:
        return self.root_size / (1 << depth)

    @property
    def finest_voxel_width(self) -> float:
        return self.cell_width(self.max_depth)


class Canvas:
    """Owner of the cell pools for one volumetric canvas."""

    def __init__(self, config: CanvasConfig | None = None):
        self.config = config or CanvasConfig()
        cfg = self.config
        self.root_count = cfg.root_count_per_axis**3
        cap = min(max(_INITIAL_CAPACITY, self._group_base(0) + 8), cfg.pool_capacity)
        cap = max(cap, self.root_count)
        self._alloc_pools(cap)
        # high-water mark: pools are initialized and meaningful below this
        self.high_water = self.root_count
        self.live_count = self.root_count
        self.free_head = NONE
        self._free_count = 0
        self.dirty_blocks: set[int] = set()
        self._init_roots()

    # -- pool storage -------------------------------------------------------

    def _alloc_pools(self, capacity: int):
        self.capacity = capacity
        self.parent = np.zeros(capacity, dtype=np.uint32)
        self.first_child = np.full(capacity, NONE, dtype=np.uint32)
        self.depth_flags = np.zeros(capacity, dtype=np.uint8)
        self.rgba = np.zeros((capacity, 4), dtype=np.float32)
        self.neighbor3 = np.full((capacity, 3), NONE, dtype=np.uint32)

    def _grow(self, needed: int):
        new_cap = self.capacity
        while new_cap < needed:
            new_cap *= 2
        new_cap = min(new_cap, self.config.pool_capacity)
        if new_cap < needed:
            raise PoolExhausted(
                f"pool capacity {self.config.pool_capacity} cells exhausted"
            )
        old = (self.parent, self.first_child, self.depth_flags, self.rgba, self.neighbor3)
        self._alloc_pools(new_cap)
        n = self.high_water
        self.parent[:n] = old[0][:n]
        self.first_child[:n] = old[1][:n]
        self.depth_flags[:n] = old[2][:n]
        self.rgba[:n] = old[3][:n]
        self.neighbor3[:n] = old[4][:n]

    def _init_roots(self):
        r = self.config.root_count_per_axis
        for i in range(self.root_count):
            self.parent[i] = i
            self.depth_flags[i] = LIVE_BIT  # depth 0
        # stored neighbors of roots: grid parity picks the direction
        for gz in range(r):
            for gy in range(r):
                for gx in range(r):
                    i = gx + r * (gy + r * gz)
                    g = (gx, gy, gz)
                    strides = (1, r, r * r)
                    for a in range(3):
                        d = 1 if (g[a] & 1) else -1
                        j = g[a] + d
                        if 0 <= j < r:
                            self.neighbor3[i, a] = i + d * strides[a]
        self.mark_dirty_range(0, self.root_count)

    # -- index helpers ------------------------------------------------------

    def is_root(self, cell: int) -> bool:
        return cell < self.root_count

    def child_slot(self, cell: int) -> int:
        """Slot of a non-root cell within its 8-group (bx + 2by + 4bz)."""
        return (cell - self.root_count) % 8

    def _group_base(self, group_index: int) -> int:
        return self.root_count + 8 * group_index

    def group_base_of(self, cell: int) -> int:
        return cell - self.child_slot(cell)

    def depth_of(self, cell: int) -> int:
        return int(self.depth_flags[cell]) & DEPTH_MASK

    def is_live(self, cell: int) -> bool:
        return cell < self.high_water and bool(self.depth_flags[cell] & LIVE_BIT)

    def is_leaf(self, cell: int) -> bool:
        return self.first_child[cell] == NONE

    def root_grid(self, root: int) -> tuple[int, int, int]:
        r = self.config.root_count_per_axis
        return root % r, (root // r) % r, root // (r * r)

    def root_at(self, gx: int, gy: int, gz: int) -> int:
        r = self.config.root_count_per_axis
        return gx + r * (gy + r * gz)

    def cell_coords(self, cell: int) -> tuple[int, int, int, int]:
        """(depth, ix, iy, iz) with each index in [0, R * 2**depth)."""
        bits = []
        c = cell
        while not self.is_root(c):
            bits.append(self.child_slot(c))
            c = int(self.parent[c])
        gx, gy, gz = self.root_grid(c)
        ix, iy, iz = gx, gy, gz
        for slot in reversed(bits):
            ix = (ix << 1) | (slot & 1)
            iy = (iy << 1) | ((slot >> 1) & 1)
            iz = (iz << 1) | ((slot >> 2) & 1)
        return len(bits), ix, iy, iz

    def cell_bounds(self, cell: int):
        """World-space (min, max) corners, double precision."""
        d, ix, iy, iz = self.cell_coords(cell)
        w = self.config.cell_width(d)
        half = self.config.extent / 2.0
        lo = np.array([ix * w - half, iy * w - half, iz * w - half])
        return lo, lo + w

    def cell_center_width(self, cell: int):
        lo, hi = self.cell_bounds(cell)
        d = self.depth_of(cell)
        return (lo + hi) / 2.0, self.config.cell_width(d)

    # -- dirty blocks -------------------------------------------------------

    def block_of(self, cell: int) -> int:
        """Dirty-block id of a pool index."""
        return cell // self.config.block_size

    def mark_dirty(self, cell: int):
        self.dirty_blocks.add(cell // self.config.block_size)

    def mark_dirty_range(self, start: int, end: int):
        bs = self.config.block_size
        for b in range(start // bs, (end - 1) // bs + 1):
            self.dirty_blocks.add(b)

    def take_dirty_blocks(self) -> set[int]:
        """Return and clear the set of modified pool blocks."""
        out = self.dirty_blocks
        self.dirty_blocks = set()
        return out

    # -- allocation ---------------------------------------------------------

    def allocate_group(self) -> int:
        """Pop the lowest free 8-group, or extend the pool.

        Returns the base index of eight zero-initialized consecutive cells.
        """
        if self.free_head != NONE:
            base = int(self.free_head)
            self.free_head = int(self.first_child[base])
            self._free_count -= 1
            self._wipe_group(base)
        else:
            base = self.high_water
            if base + 8 > self.capacity:
                self._grow(base + 8)
            self.high_water = base + 8
            self._wipe_group(base)
        self.live_count += 8
        self.mark_dirty_range(base, base + 8)
        return base

    def _wipe_group(self, base: int):
        self.parent[base : base + 8] = 0
        self.first_child[base : base + 8] = NONE
        self.depth_flags[base : base + 8] = 0
        self.rgba[base : base + 8] = 0.0
        self.neighbor3[base : base + 8] = NONE

    def free_group(self, base: int):
        """Thread a group back onto the sorted free list."""
        assert not self.is_root(base) and self.child_slot(base) == 0
        self.depth_flags[base : base + 8] = 0
        self.first_child[base : base + 8] = NONE
        if self.free_head == NONE or base < self.free_head:
            self.first_child[base] = self.free_head
            self.free_head = base
        else:
            # sorted insert keeps the lowest-first reuse policy
            cur = int(self.free_head)
            nxt = int(self.first_child[cur])
            while nxt != NONE and nxt < base:
                cur = nxt
                nxt = int(self.first_child[cur])
            self.first_child[cur] = base
            self.first_child[base] = nxt
        self._free_count += 1
        self.live_count -= 8
        self.mark_dirty_range(base, base + 8)

    def free_list(self) -> list[int]:
        out = []
        cur = int(self.free_head)
        while cur != NONE:
            out.append(cur)
            cur = int(self.first_child[cur])
        return out

    # -- refine / coarsen ---------------------------------------------------

    def refine_cell(self, cell: int) -> int:
        """Split a leaf into eight children inheriting its color.

        Returns the base index of the new group.
        """
        if not self.is_leaf(cell):
            raise ValueError(f"cell {cell} is not a leaf")
        depth = self.depth_of(cell)
        if depth >= self.config.max_depth:
            raise MaxDepthExceeded(f"cell {cell} already at depth {depth}")
        base = self.allocate_group()
        color = self.rgba[cell].copy()
        for k in range(8):
            c = base + k
            self.parent[c] = cell
            self.depth_flags[c] = (depth + 1) | LIVE_BIT
            self.rgba[c] = color
        self.first_child[cell] = base
        self.mark_dirty(cell)
        self._set_children_neighbors(cell, base)
        self._repair_after_refine(cell)
        return base

    def coarsen_cell(self, cell: int):
        """Merge eight leaf children back into their parent.

        The parent takes the arithmetic mean of the children's colors.
        """
        base = int(self.first_child[cell])
        if base == NONE:
            raise ChildrenNotLeaves(f"cell {cell} has no children")
        for k in range(8):
            if not self.is_leaf(base + k):
                raise ChildrenNotLeaves(f"child {base + k} is not a leaf")
        mean = self.rgba[base : base + 8].astype(np.float64).mean(axis=0)
        self.rgba[cell] = mean.astype(np.float32)
        self.first_child[cell] = NONE
        self._repair_after_coarsen(cell, base)
        self.free_group(base)
        self.mark_dirty(cell)

    # -- point location -----------------------------------------------------

    def point_to_root(self, p) -> int:
        cfg = self.config
        half = cfg.extent / 2.0
        r = cfg.root_count_per_axis
        g = []
        for a in range(3):
            if not (-half <= p[a] <= half):
                raise OutOfCanvas(f"coordinate {p[a]} outside +-{half}")
            gi = int((p[a] + half) / cfg.root_size)
            g.append(min(gi, r - 1))
        return self.root_at(*g)

    def locate_leaf(self, p, direction=None):
        """Leaf containing a canvas-space point, plus the point in that
        leaf's cell-local frame (origin at cell center, size one).

        ``direction`` breaks ties on cell boundaries: coordinates exactly on
        a child boundary descend toward the side the direction points into.
        Double-precision throughout.
        """
        root = self.point_to_root(p)
        cfg = self.config
        half = cfg.extent / 2.0
        g = self.root_grid(root)
        w = cfg.root_size
        cx = [-half + (g[a] + 0.5) * w for a in range(3)]
        cell = root
        while self.first_child[cell] != NONE:
            w *= 0.5
            slot = 0
            for a in range(3):
                if p[a] > cx[a]:
                    b = 1
                elif p[a] < cx[a]:
                    b = 0
                else:
                    b = 1 if (direction is not None and direction[a] > 0) else 0
                slot |= b << a
                cx[a] += (0.5 if b else -0.5) * w
            cell = int(self.first_child[cell]) + slot
        local = tuple((p[a] - cx[a]) / w for a in range(3))
        return cell, local

    def locate_leaf_batch(self, points: np.ndarray) -> np.ndarray:
        """Vectorized leaf lookup for an (N, 3) array of points."""
        cfg = self.config
        half = cfg.extent / 2.0
        r = cfg.root_count_per_axis
        if np.any(np.abs(points) > half):
            raise OutOfCanvas("point outside canvas")
        g = np.minimum((points + half) / cfg.root_size, r - 1).astype(np.int64)
        cells = g[:, 0] + r * (g[:, 1] + r * g[:, 2])
        centers = -half + (g + 0.5) * cfg.root_size
        w = cfg.root_size
        for _ in range(cfg.max_depth + 1):
            fc = self.first_child[cells]
            active = fc != NONE
            if not active.any():
                break
            w *= 0.5
            bits = (points[active] >= centers[active]).astype(np.int64)
            slots = bits[:, 0] + 2 * bits[:, 1] + 4 * bits[:, 2]
            cells[active] = fc[active].astype(np.int64) + slots
            centers[active] += (bits - 0.5) * w
        return cells

    # -- neighbors ----------------------------------------------------------

    def stored_direction(self, cell: int, axis: int) -> int:
        """-1 or +1: the side whose neighbor does not share the parent."""
        if self.is_root(cell):
            return 1 if (self.root_grid(cell)[axis] & 1) else -1
        return 1 if ((self.child_slot(cell) >> axis) & 1) else -1

    def sibling_along(self, cell: int, axis: int, direction: int) -> int | None:
        """Sibling face neighbor, or None when the face leaves the parent."""
        if self.is_root(cell):
            return None
        b = (self.child_slot(cell) >> axis) & 1
        if (direction > 0 and b == 0) or (direction < 0 and b == 1):
            return cell + direction * (1 << axis)
        return None

    def face_neighbor(self, cell: int, axis: int, direction: int) -> int:
        """Neighbor of depth <= own depth across a face; NONE at boundary.

        Sibling arithmetic when the face stays inside the parent, root-grid
        arithmetic for roots, the stored neighbor pool otherwise.
        """
        if self.is_root(cell):
            r = self.config.root_count_per_axis
            g = list(self.root_grid(cell))
            g[axis] += direction
            if not (0 <= g[axis] < r):
                return NONE
            return self.root_at(*g)
        sib = self.sibling_along(cell, axis, direction)
        if sib is not None:
            return sib
        return int(self.neighbor3[cell, axis])

    def compute_stored_neighbor(self, cell: int, axis: int) -> int:
        """Recompute one stored-neighbor entry from the tree structure."""
        d, *i = self.cell_coords(cell)
        direction = 1 if (i[axis] & 1) else -1
        j = i[axis] + direction
        if j < 0 or j >= self.config.root_count_per_axis << d:
            return NONE
        loc = list(i)
        loc[axis] = j
        return self.find_cell_at(d, loc[0], loc[1], loc[2])

    def find_cell_at(self, depth: int, ix: int, iy: int, iz: int) -> int:
        """Deepest allocated cell at integer location, limited to ``depth``."""
        gx, gy, gz = ix >> depth, iy >> depth, iz >> depth
        cell = self.root_at(gx, gy, gz)
        for level in range(depth - 1, -1, -1):
            fc = int(self.first_child[cell])
            if fc == NONE:
                break
            slot = ((ix >> level) & 1) | (((iy >> level) & 1) << 1) | (((iz >> level) & 1) << 2)
            cell = fc + slot
        return cell

    def update_neighbors(self, cells) -> None:
        """Recompute stored neighbors for every cell in ``cells``."""
        for c in cells:
            if not self.is_live(c):
                continue
            for a in range(3):
                self.neighbor3[c, a] = self.compute_stored_neighbor(c, a)
            self.mark_dirty(c)

    def all_coords_arrays(self):
        """(cells, depth, ix, iy, iz) int64 arrays for every live cell."""
        r = self.config.root_count_per_axis
        roots = np.arange(self.root_count, dtype=np.int64)
        level = (roots, np.zeros(self.root_count, np.int64),
                 roots % r, (roots // r) % r, roots // (r * r))
        chunks = [level]
        k = np.arange(8, dtype=np.int64)
        bx, by, bz = k & 1, (k >> 1) & 1, (k >> 2) & 1
        while True:
            cur, d, ix, iy, iz = level
            fc = self.first_child[cur]
            m = fc != NONE
            if not m.any():
                break
            base = fc[m].astype(np.int64)
            ch = (base[:, None] + k).ravel()
            nix = (ix[m][:, None] * 2 + bx).ravel()
            niy = (iy[m][:, None] * 2 + by).ravel()
            niz = (iz[m][:, None] * 2 + bz).ravel()
            nd = np.repeat(d[m] + 1, 8)
            level = (ch, nd, nix, niy, niz)
            chunks.append(level)
        return tuple(np.concatenate([c[i] for c in chunks]) for i in range(5))

    def find_cells_at_batch(self, depths, jx, jy, jz):
        """Vectorized ``find_cell_at`` over aligned query arrays."""
        r = self.config.root_count_per_axis
        gx, gy, gz = jx >> depths, jy >> depths, jz >> depths
        cur = gx + r * (gy + r * gz)
        lvl = np.zeros(len(cur), dtype=np.int64)
        for _ in range(int(depths.max(initial=0))):
            fc = self.first_child[cur]
            act = (fc != NONE) & (lvl < depths)
            if not act.any():
                break
            rem = depths - lvl - 1
            slot = (
                ((jx >> rem) & 1)
                | (((jy >> rem) & 1) << 1)
                | (((jz >> rem) & 1) << 2)
            )
            cur[act] = fc[act].astype(np.int64) + slot[act]
            lvl[act] += 1
        return cur

    def rebuild_all_neighbors(self):
        """Full stored-neighbor rebuild (after snapshot load or bulk edits)."""
        cells, d, ix, iy, iz = self.all_coords_arrays()
        r = self.config.root_count_per_axis
        coords = (ix, iy, iz)
        for axis in range(3):
            i = coords[axis]
            dirs = np.where((i & 1) == 1, 1, -1)
            j = i + dirs
            valid = (j >= 0) & (j < (r << d))
            res = np.full(len(cells), NONE, dtype=np.int64)
            if valid.any():
                q = [c.copy() for c in coords]
                q[axis] = j
                res[valid] = self.find_cells_at_batch(
                    d[valid], q[0][valid], q[1][valid], q[2][valid])
            self.neighbor3[cells, axis] = res.astype(np.uint32)
        self.mark_dirty_range(0, max(self.high_water, 1))

    def bulk_refine(self, cells) -> np.ndarray:
        """Refine many leaves at once, skipping incremental neighbor repair.

        Returns the child-group base per input cell.  The stored-neighbor
        pool is stale afterwards; call ``rebuild_all_neighbors`` (or repair
        selectively) before anything traverses.  Meant for scene builders
        and loaders, not the interactive paint path.
        """
        carr = np.asarray(list(cells), dtype=np.int64)
        n = len(carr)
        if n == 0:
            return np.empty(0, dtype=np.int64)
        if (self.first_child[carr] != NONE).any():
            raise ValueError("bulk_refine target is not a leaf")
        depths = (self.depth_flags[carr] & DEPTH_MASK).astype(np.int64)
        if depths.max() >= self.config.max_depth:
            raise MaxDepthExceeded("bulk_refine would exceed max depth")
        bases = np.empty(n, dtype=np.int64)
        k = 0
        while self.free_head != NONE and k < n:
            bases[k] = self.allocate_group()
            k += 1
        if k < n:
            need = (n - k) * 8
            start = self.high_water
            if start + need > self.capacity:
                self._grow(start + need)
            bases[k:] = start + 8 * np.arange(n - k, dtype=np.int64)
            self.high_water = start + need
            self.live_count += need
            self.parent[start : start + need] = 0
            self.first_child[start : start + need] = NONE
            self.rgba[start : start + need] = 0.0
            self.neighbor3[start : start + need] = NONE
            self.mark_dirty_range(start, start + need)
        ch = (bases[:, None] + np.arange(8, dtype=np.int64)).ravel()
        self.parent[ch] = np.repeat(carr, 8).astype(np.uint32)
        self.depth_flags[ch] = (np.repeat(depths + 1, 8) | LIVE_BIT).astype(np.uint8)
        self.rgba[ch] = np.repeat(self.rgba[carr], 8, axis=0)
        self.first_child[carr] = bases.astype(np.uint32)
        bs = self.config.block_size
        self.dirty_blocks.update(np.unique(carr // bs).tolist())
        self.dirty_blocks.update(np.unique(ch // bs).tolist())
        return bases

    def _init_root_neighbors_only(self):
        r = self.config.root_count_per_axis
        strides = (1, r, r * r)
        for i in range(self.root_count):
            g = self.root_grid(i)
            for a in range(3):
                d = 1 if (g[a] & 1) else -1
                j = g[a] + d
                self.neighbor3[i, a] = i + d * strides[a] if 0 <= j < r else NONE

    def _set_children_neighbors(self, cell: int, base: int):
        """Stored neighbors for a fresh 8-group under ``cell``.

        The child's outward stored neighbor is the matching child of the
        parent's neighbor when that neighbor has equal depth and children,
        else the parent's neighbor itself.
        """
        pd = self.depth_of(cell)
        sides = {}
        for a in range(3):
            for direction in (-1, 1):
                n = self.face_neighbor(cell, a, direction)
                refined = (n != NONE and self.depth_of(n) == pd
                           and self.first_child[n] != NONE)
                sides[(a, direction)] = (n, int(self.first_child[n]) if refined else -1)
        for k in range(8):
            child = base + k
            for a in range(3):
                b = (k >> a) & 1
                n, nfc = sides[(a, 1 if b else -1)]
                if nfc >= 0:
                    # matching child: flip the axis bit, keep the others
                    n = nfc + (k ^ (1 << a))
                self.neighbor3[child, a] = n
            self.mark_dirty(child)

    def _walk_face_region(self, start: int, axis: int, inward_bit: int, span,
                          depth0: int, start_coords=None):
        """Yield (cell, depth, coords) over ``start``'s subtree on one face.

        ``span`` is (lo, hi) bounds per non-axis coordinate expressed at
        ``depth0``; only subtree branches overlapping it are visited.
        """
        other = [a for a in range(3) if a != axis]
        if start_coords is None:
            sd, *si = self.cell_coords(start)
        else:
            sd, si = start_coords[0], list(start_coords[1:])
        stack = [(start, sd, si)]
        while stack:
            c, d, i = stack.pop()
            yield c, d, i
            fc = int(self.first_child[c])
            if fc == NONE:
                continue
            for k in range(8):
                if ((k >> axis) & 1) != inward_bit:
                    continue
                child = fc + k
                ci = [(i[a] << 1) | ((k >> a) & 1) for a in range(3)]
                cd = d + 1
                ok = True
                for idx, a in enumerate(other):
                    lo, hi = span[idx]
                    if cd >= depth0:
                        lo_c, hi_c = lo << (cd - depth0), (hi + 1) << (cd - depth0)
                        if not (lo_c <= ci[a] < hi_c):
                            ok = False
                            break
                    else:
                        if (lo >> (depth0 - cd)) != ci[a]:
                            ok = False
                            break
                if ok:
                    stack.append((child, cd, ci))

    def _face_step(self, cell: int, d: int, i, axis: int, direction: int):
        """face_neighbor plus the neighbor's coords, derived in O(1)."""
        j = i[axis] + direction
        if j < 0 or j >= (self.config.root_count_per_axis << d):
            return None
        if d == 0:
            g = list(i)
            g[axis] = j
            return self.root_at(*g), 0, g
        if ((i[axis] & 1) == 0) == (direction > 0):
            ni = list(i)
            ni[axis] = j
            return cell + direction * (1 << axis), d, ni
        n = int(self.neighbor3[cell, axis])
        if n == NONE:
            return None
        nd = self.depth_of(n)
        sh = d - nd
        ni = [v >> sh for v in i]
        ni[axis] = j >> sh
        return n, nd, ni

    def _repair_side(self, cell: int, d: int, i, axis: int, direction: int):
        """Upgrade stored neighbors that pointed at ``cell`` across one face
        to the matching new child.  O(1) per affected cell: a cell at
        (cd, ci) pointing at ``cell`` must now point at the child whose slot
        follows from ci's bits at depth d+1.
        """
        step = self._face_step(cell, d, i, axis, direction)
        if step is None:
            return
        n, _nd, _ni = step
        if self.first_child[n] == NONE:
            # only cells deeper than `cell` can point at it, and those live
            # inside the face neighbor's subtree; a leaf neighbor has none
            return
        fc = int(self.first_child[cell])
        axis_bit = 1 if direction > 0 else 0  # child on the face side
        other = [a for a in range(3) if a != axis]
        span = [(i[a], i[a]) for a in other]
        inward_bit = 0 if direction > 0 else 1
        neighbor3 = self.neighbor3
        for c, cd, ci in self._walk_face_region(n, axis, inward_bit, span, d,
                                                start_coords=(_nd, *_ni)):
            if cd <= d or int(neighbor3[c, axis]) != cell:
                continue
            sh = cd - (d + 1)
            slot = axis_bit << axis
            for a in other:
                slot |= ((ci[a] >> sh) & 1) << a
            neighbor3[c, axis] = fc + slot
            self.mark_dirty(c)

    def _repair_after_refine(self, cell: int):
        d, *i = self.cell_coords(cell)
        for axis in range(3):
            for direction in (-1, 1):
                self._repair_side(cell, d, i, axis, direction)

    def _repair_after_coarsen(self, cell: int, base: int):
        removed = set(range(base, base + 8))
        d, *i = self.cell_coords(cell)
        for axis in range(3):
            for direction in (-1, 1):
                step = self._face_step(cell, d, i, axis, direction)
                if step is None:
                    continue
                n, nd, ni = step
                if n in removed or self.first_child[n] == NONE:
                    continue
                other = [a for a in range(3) if a != axis]
                span = [(i[a], i[a]) for a in other]
                inward_bit = 0 if direction > 0 else 1
                for c, cd, ci in self._walk_face_region(n, axis, inward_bit,
                                                        span, d,
                                                        start_coords=(nd, *ni)):
                    if int(self.neighbor3[c, axis]) in removed:
                        self.neighbor3[c, axis] = cell
                        self.mark_dirty(c)

    def all_face_neighbors(self, cell: int) -> list[int]:
        """Every leaf sharing a face with ``cell`` (6 to 24 of them inside)."""
        d, *i = self.cell_coords(cell)
        out = []
        for axis in range(3):
            for direction in (-1, 1):
                n = self.face_neighbor(cell, axis, direction)
                if n == NONE:
                    continue
                if self.first_child[n] == NONE:
                    out.append(n)
                    continue
                # equal-depth neighbor with children: collect face-side leaves
                other = [a for a in range(3) if a != axis]
                span = [(i[a], i[a]) for a in other]
                inward_bit = 0 if direction > 0 else 1
                for c, _cd, _ci in self._walk_face_region(n, axis, inward_bit,
                                                          span, d):
                    if self.first_child[c] == NONE:
                        out.append(c)
        return out

    # -- iteration & checks -------------------------------------------------

    def iter_live(self):
        # freed groups have their flags wiped, so the live bit is the truth
        live = np.nonzero(self.depth_flags[: self.high_water] & LIVE_BIT)[0]
        return iter(live.tolist())

    def iter_leaves(self):
        for c in self.iter_live():
            if self.first_child[c] == NONE:
                yield c

    def validate(self):
        """Structural invariant check; raises AssertionError on corruption."""
        free = set(self.free_list())
        seen = set()
        for b in free:
            assert b >= self.root_count and self.child_slot(b) == 0
            assert b not in seen
            seen.add(b)
        stack = [(r, 0) for r in range(self.root_count)]
        live = 0
        while stack:
            c, d = stack.pop()
            live += 1
            assert self.depth_flags[c] & LIVE_BIT, f"cell {c} not live"
            assert self.depth_of(c) == d, f"cell {c} depth mismatch"
            fc = int(self.first_child[c])
            if fc != NONE:
                assert fc not in free, f"live children of {c} on free list"
                for k in range(8):
                    assert int(self.parent[fc + k]) == c
                    stack.append((fc + k, d + 1))
        assert live == self.live_count, (live, self.live_count)

    def occupancy(self) -> float:
        return self.live_count / float(self.config.pool_capacity)
