"""Shared result containers for the traversal kernels.

Both the compiled and the pure-Python kernel return these, so callers and
tests never see which backend ran.
"""

from dataclasses import dataclass


@dataclass
class EntryState:
    """Ray state at the first leaf, produced in double precision.

    ``p`` is the cell-local start point already rounded to float32 (the
    rounding step that contributes the initial error e0); ``q`` is its
    world-space float32 counterpart used by the drift-baseline traversal.
    """

    cell: int
    depth: int
    i: tuple  # integer cell coordinates (ix, iy, iz) at `depth`
    p: tuple  # float32 cell-local start point
    e0_local: float  # |float32(p) - p| in cell-local units (L2)
    width: float  # entry cell width, meters
    p0: tuple  # double-precision world entry point
    entry_axis: int  # canvas face the ray entered through, -1 if eye inside
    q: tuple  # float32 world start point (world-coordinate baseline)
    e0_world: float  # |float32(q) - p0| in meters


@dataclass
class RayResult:
    rgb: tuple  # accumulated premultiplied color (float32 values)
    transmittance: float
    n: int  # crossed-cell count
    length: float  # path length inside the canvas, meters (double accumulator)
    sum_width: float  # sum of crossed-cell widths, meters
    endpoint: tuple  # double-precision world endpoint reconstruction
    plane: tuple | None  # final crossed face as (axis, depth, j), dyadic ints
    aborted: bool
    exited: bool  # left the canvas (vs. terminated by opacity)
    path: list | None = None  # visited leaf indices when recording
