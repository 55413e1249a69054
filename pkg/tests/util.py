"""Shared test helpers: random tree builders and independent oracles.

Everything here recomputes structure from first principles (coordinates,
point queries, Monte-Carlo sampling) so product code and oracle never share
a code path for the quantity under test.
"""

from __future__ import annotations

import numpy as np

from canvox.octree import NONE, Canvas, CanvasConfig

DEPTH_MASK = 0x1F


def small_config(**kw) -> CanvasConfig:
    defaults = dict(root_count_per_axis=4, root_size=10_000.0, max_depth=24)
    defaults.update(kw)
    return CanvasConfig(**defaults)


def all_coords(cv: Canvas) -> dict[int, tuple[int, int, int, int]]:
    """(depth, ix, iy, iz) for every live cell, by BFS from the roots."""
    coords = {}
    level = []
    for root in range(cv.root_count):
        coords[root] = (0, *cv.root_grid(root))
        level.append(root)
    while level:
        nxt = []
        for c in level:
            fc = int(cv.first_child[c])
            if fc == NONE:
                continue
            d, ix, iy, iz = coords[c]
            for k in range(8):
                coords[fc + k] = (
                    d + 1,
                    (ix << 1) | (k & 1),
                    (iy << 1) | ((k >> 1) & 1),
                    (iz << 1) | ((k >> 2) & 1),
                )
                nxt.append(fc + k)
        level = nxt
    return coords


class TreeBuilder:
    """Random refine/coarsen driver that tracks the live leaf set."""

    def __init__(self, cv: Canvas, rng: np.random.Generator):
        self.cv = cv
        self.rng = rng
        self.leaves = list(range(cv.root_count))
        self.pos = {c: i for i, c in enumerate(self.leaves)}

    def _remove_leaf(self, c):
        i = self.pos.pop(c)
        last = self.leaves.pop()
        if last != c:
            self.leaves[i] = last
            self.pos[last] = i

    def _add_leaf(self, c):
        self.pos[c] = len(self.leaves)
        self.leaves.append(c)

    def refine_random(self, max_depth=None) -> bool:
        cv = self.cv
        if max_depth is None:
            max_depth = cv.config.max_depth
        for _ in range(32):
            c = self.leaves[int(self.rng.integers(len(self.leaves)))]
            if cv.depth_of(c) < max_depth:
                base = cv.refine_cell(c)
                self._remove_leaf(c)
                for k in range(8):
                    self._add_leaf(base + k)
                return True
        return False

    def coarsen_random(self) -> bool:
        cv = self.cv
        for _ in range(32):
            c = self.leaves[int(self.rng.integers(len(self.leaves)))]
            if cv.is_root(c):
                continue
            p = int(cv.parent[c])
            base = int(cv.first_child[p])
            if all(cv.is_leaf(base + k) for k in range(8)):
                cv.coarsen_cell(p)
                for k in range(8):
                    self._remove_leaf(base + k)
                self._add_leaf(p)
                return True
        return False

    def grow(self, target_cells: int, coarsen_prob=0.2, max_depth=None):
        while self.cv.live_count < target_cells:
            if self.rng.random() < coarsen_prob:
                self.coarsen_random()
            else:
                if not self.refine_random(max_depth):
                    break
        return self.cv


def random_tree(seed: int, target_cells=2000, max_depth=8, coarsen_prob=0.2,
                config=None) -> Canvas:
    cv = Canvas(config or small_config())
    rng = np.random.default_rng(seed)
    TreeBuilder(cv, rng).grow(target_cells, coarsen_prob, max_depth)
    return cv


def brute_force_neighbors(cv: Canvas, coords=None):
    """Point-query oracle for the stored-neighbor pool.

    Offsets each cell's stored-side face center outward by a quarter of the
    finest voxel width, locates the containing leaf, and lifts it to the
    cell's own depth.  Returns (cells, expected[N,3]) aligned arrays.
    """
    if coords is None:
        coords = all_coords(cv)
    cells = np.fromiter(coords.keys(), dtype=np.int64)
    arr = np.array([coords[c] for c in cells], dtype=np.int64)
    d = arr[:, 0]
    w = cv.config.root_size / np.exp2(d.astype(np.float64))
    half = cv.config.extent / 2.0
    centers = (arr[:, 1:].astype(np.float64) + 0.5) * w[:, None] - half
    finest = cv.config.finest_voxel_width
    expected = np.full((len(cells), 3), NONE, dtype=np.int64)
    for axis in range(3):
        dirs = np.where((arr[:, 1 + axis] & 1) == 1, 1.0, -1.0)
        pts = centers.copy()
        pts[:, axis] += dirs * (w / 2.0 + finest / 4.0)
        inside = np.abs(pts[:, axis]) <= half
        if inside.any():
            cur = cv.locate_leaf_batch(pts[inside]).astype(np.int64)
            target_d = d[inside]
            for _ in range(cv.config.max_depth + 1):
                depths = (cv.depth_flags[cur] & DEPTH_MASK).astype(np.int64)
                mask = depths > target_d
                if not mask.any():
                    break
                cur[mask] = cv.parent[cur[mask]]
            expected[inside, axis] = cur
    return cells, expected


def assert_neighbors_match(cv: Canvas):
    cells, expected = brute_force_neighbors(cv)
    got = cv.neighbor3[cells].astype(np.int64)
    bad = np.nonzero(got != expected)
    if len(bad[0]):
        i, a = bad[0][0], bad[1][0]
        raise AssertionError(
            f"{len(bad[0])} stored-neighbor mismatches; first: cell "
            f"{cells[i]} axis {a}: stored {got[i, a]} expected {expected[i, a]}"
        )


def leaf_bounds_map(cv: Canvas, coords=None):
    """leaf -> (lo, hi) world bounds derived from integer coordinates."""
    if coords is None:
        coords = all_coords(cv)
    half = cv.config.extent / 2.0
    out = {}
    for c, (d, ix, iy, iz) in coords.items():
        if cv.first_child[c] != NONE:
            continue
        w = cv.config.root_size / (1 << d)
        lo = np.array([ix * w - half, iy * w - half, iz * w - half])
        out[c] = (lo, lo + w)
    return out
