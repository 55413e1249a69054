"""canvox: volumetric painting on deep sparse octrees with precise ray casting."""

from ._kernel import BACKEND as KERNEL_BACKEND
from .octree import NONE, Canvas, CanvasConfig
from .paint import Brush, PaintEngine, Room, StrokeSample
from .render import Camera, cast_ray, render_image

__version__ = "0.1.0"

__all__ = [
    "Canvas",
    "CanvasConfig",
    "Brush",
    "PaintEngine",
    "Room",
    "StrokeSample",
    "Camera",
    "cast_ray",
    "render_image",
    "KERNEL_BACKEND",
    "NONE",
]
