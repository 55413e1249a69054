"""Deferred one-level-per-frame tree adjustment vs. a direct oracle."""

import math

import numpy as np
import pytest

from canvox.octree import NONE, Canvas
from canvox.paint import (
    AdjustmentQueue,
    Brush,
    PaintEngine,
    StampGeom,
    StrokeSample,
    apply_stamp,
    effective_max_depth,
    process_adjustments,
    target_depth,
)

from util import all_coords, small_config


def oracle_refine(cv: Canvas, stamp: StampGeom, rooms=()):
    """Non-deferred reference: recursively refine to target right now."""
    cfg = cv.config
    changed = True
    while changed:
        changed = False
        for leaf in [c for c in all_coords(cv) if cv.is_leaf(c)]:
            center, w = cv.cell_center_width(leaf)
            limit = min(
                target_depth(stamp.min_radius, cfg),
                effective_max_depth(center, list(rooms), cfg),
            )
            if cv.depth_of(leaf) < limit and stamp.coverage(tuple(center), w / 2) > 0:
                cv.refine_cell(leaf)
                changed = True


def tree_signature(cv: Canvas):
    """Topology as a set of (depth, ix, iy, iz) leaf coordinates."""
    coords = all_coords(cv)
    return {coords[c] for c in coords if cv.is_leaf(c)}


def test_empty_queue_no_work():
    cv = Canvas(small_config())
    q = AdjustmentQueue()
    assert process_adjustments(cv, q, budget=100) == 0


def test_single_path_mark_one_level_per_frame():
    # tiny stamp inside one corner path; max_depth caps the target at 3
    cfg = small_config(root_count_per_axis=1, root_size=8.0, max_depth=3)
    cv = Canvas(cfg)
    q = AdjustmentQueue()
    brush = Brush(shape="sphere", radius=1e-4, rgba=(1, 0, 0, 0.5))
    center3 = (-4.0 + 0.5, -4.0 + 0.5, -4.0 + 0.5)  # center of the depth-3 corner cell
    apply_stamp(cv, brush, StampGeom("sphere", center3, 1e-4), q)
    assert len(q) == 1
    frames = 0
    while not q.empty():
        work = process_adjustments(cv, q, budget=1)
        assert work == 1
        frames += 1
    assert frames == 3  # one level per frame, three levels needed
    leaf, _ = cv.locate_leaf(center3)
    assert cv.depth_of(leaf) == 3


def test_budget_limits_per_frame_work():
    cfg = small_config(root_count_per_axis=1, root_size=16.0, max_depth=4)
    cv = Canvas(cfg)
    q = AdjustmentQueue()
    brush = Brush(shape="sphere", radius=16.0, rgba=(1, 0, 0, 0.5))
    apply_stamp(cv, brush, StampGeom("sphere", (0.0, 0.0, 0.0), 16.0), q)
    total = 0
    while not q.empty():
        w = process_adjustments(cv, q, budget=5)
        assert w <= 5
        total += w
    assert total > 5


@pytest.mark.parametrize("budget", [1, 7, 1000])
def test_deferred_tree_equals_oracle(budget):
    cfg = small_config(root_count_per_axis=2, root_size=16.0, max_depth=5)
    stamp = StampGeom("sphere", (3.0, -2.0, 1.0), 2.5)
    brush = Brush(shape="sphere", radius=2.5, rgba=(0.2, 0.8, 0.2, 0.6))

    deferred = Canvas(cfg)
    q = AdjustmentQueue()
    apply_stamp(deferred, brush, stamp, q)
    k_needed_bound = None
    frames = 0
    while not q.empty():
        process_adjustments(deferred, q, budget=budget)
        frames += 1
        assert frames < 10_000

    oracle = Canvas(cfg)
    apply_stamp(oracle, brush, stamp)
    oracle_refine(oracle, stamp)

    assert tree_signature(deferred) == tree_signature(oracle)
    # frame bound: ceil(K/B) + max depth delta
    k = (oracle.live_count - oracle.root_count) // 8
    assert frames <= math.ceil(k / budget) + cfg.max_depth


def test_deferred_frame_bound_tight():
    cfg = small_config(root_count_per_axis=1, root_size=16.0, max_depth=4)
    stamp = StampGeom("sphere", (0.0, 0.0, 0.0), 4.0)
    brush = Brush(shape="sphere", radius=4.0, rgba=(1, 1, 1, 0.5))
    cv = Canvas(cfg)
    q = AdjustmentQueue()
    apply_stamp(cv, brush, stamp, q)
    budget = 16
    frames = 0
    refines = 0
    while not q.empty():
        refines += process_adjustments(cv, q, budget=budget)
        frames += 1
    assert frames <= math.ceil(refines / budget) + cfg.max_depth


def test_repeated_small_brush_reaches_target_depth():
    cfg = small_config(root_count_per_axis=1, root_size=1024.0, max_depth=10)
    cv = Canvas(cfg)
    eng = PaintEngine(cv, budget_per_frame=64)
    r = 8.0
    eng.set_brush(Brush(shape="sphere", radius=r, rgba=(0.6, 0.3, 0.1, 0.8)))
    want = target_depth(r, cfg)
    for i in range(6):
        eng.stroke_begin()
        eng.add_sample(StrokeSample(i, (5.0, 5.0, 5.0)))
        eng.stroke_end()
        eng.drain()
    leaf, _ = cv.locate_leaf((5.0, 5.0, 5.0))
    assert cv.depth_of(leaf) == want
    # oracle: direct refinement lands at the same depth
    oracle = Canvas(cfg)
    stamp = StampGeom("sphere", (5.0, 5.0, 5.0), r)
    apply_stamp(oracle, Brush(shape="sphere", radius=r, rgba=(0.6, 0.3, 0.1, 0.8)),
                stamp)
    oracle_refine(oracle, stamp)
    oleaf, _ = oracle.locate_leaf((5.0, 5.0, 5.0))
    assert oracle.depth_of(oleaf) == want


def test_room_limits_refinement_depth():
    cfg = small_config(root_count_per_axis=1, root_size=1024.0, max_depth=10)
    cv = Canvas(cfg)
    eng = PaintEngine(cv, budget_per_frame=1000)
    from canvox.paint import Room

    # a room far from the paint point caps depth below the brush target
    eng.add_room(Room("far", (400.0, 400.0, 400.0), (404.0, 404.0, 404.0)))
    eng.set_brush(Brush(shape="sphere", radius=2.0, rgba=(1, 0, 0, 0.9)))
    eng.stroke_begin()
    eng.add_sample(StrokeSample(0.0, (-400.0, -400.0, -400.0)))
    eng.stroke_end()
    eng.drain()
    leaf, _ = cv.locate_leaf((-400.0, -400.0, -400.0))
    pos = (-400.0, -400.0, -400.0)
    limit = effective_max_depth(pos, eng.rooms, cfg)
    assert limit < target_depth(2.0, cfg)
    assert cv.depth_of(leaf) <= limit


def test_coarsen_merges_uniform_painted_region():
    cfg = small_config(root_count_per_axis=1, root_size=16.0, max_depth=6)
    cv = Canvas(cfg)
    # refine a block to depth 4 around origin, then paint it with a huge brush
    eng = PaintEngine(cv, budget_per_frame=100_000)
    eng.set_brush(Brush(shape="sphere", radius=0.4, rgba=(0.1, 0.2, 0.9, 1.0)))
    eng.stroke_begin()
    eng.add_sample(StrokeSample(0.0, (0.0, 0.0, 0.0)))
    eng.stroke_end()
    eng.drain()
    deep = cv.live_count
    assert cv.depth_of(cv.locate_leaf((0.0, 0.0, 0.0))[0]) >= 4
    # now a brush far larger than the region: coarse target, uniform color
    eng.set_brush(Brush(shape="sphere", radius=160.0, rgba=(0.5, 0.5, 0.5, 1.0)))
    for i in range(8):
        eng.stroke_begin()
        eng.add_sample(StrokeSample(float(i), (0.0, 0.0, 0.0)))
        eng.stroke_end()
        eng.drain()
    assert cv.live_count < deep  # conservatively coarsened
    cv.validate()


def test_coarsen_respects_merge_tolerance():
    cfg = small_config(root_count_per_axis=1, root_size=16.0, max_depth=3)
    cv = Canvas(cfg)
    base = cv.refine_cell(0)
    # children strongly different: a coarsen mark must not merge them
    cv.rgba[base] = (1, 0, 0, 1)
    cv.rgba[base + 1] = (0, 1, 0, 1)
    center, w = cv.cell_center_width(0)
    q = AdjustmentQueue()
    q.mark_coarsen(0, tuple(center), w / 2, StampGeom("sphere", (0.0, 0.0, 0.0), 100.0))
    process_adjustments(cv, q, budget=10)
    assert not cv.is_leaf(0)  # still refined
    # near-identical children do merge
    cv.rgba[base : base + 8] = (0.3, 0.3, 0.3, 1.0)
    q.mark_coarsen(0, tuple(center), w / 2, StampGeom("sphere", (0.0, 0.0, 0.0), 100.0))
    process_adjustments(cv, q, budget=10)
    assert cv.is_leaf(0)


def test_pool_exhaustion_retains_marks():
    cfg = small_config(root_count_per_axis=1, root_size=16.0, max_depth=6,
                       pool_capacity=1 + 8 * 40)
    cv = Canvas(cfg)
    q = AdjustmentQueue()
    brush = Brush(shape="sphere", radius=0.2, rgba=(1, 0, 0, 0.5))
    apply_stamp(cv, brush, StampGeom("sphere", (0.0, 0.0, 0.0), 8.0), q)
    # drive until the pool fills; marks must survive the failure
    for _ in range(200):
        process_adjustments(cv, q, budget=50)
        if cv.live_count + 8 > cfg.pool_capacity:
            break
    assert not q.empty()
    cv.validate()
