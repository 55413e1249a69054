"""Traversal kernel backend selection.

Prefers the compiled extension; falls back to the pure-Python kernel, which
produces bit-identical positions (and within-1-ulp colors) at a fraction of
the speed.  ``CANVOX_BACKEND=python|compiled`` forces a choice.
"""

import os

from . import pykernel

_forced = os.environ.get("CANVOX_BACKEND", "").strip().lower()

_impl = None
if _forced != "python":
    try:
        from . import ckernel as _impl
    except ImportError:
        _impl = None
        if _forced == "compiled":
            raise ImportError(
                "CANVOX_BACKEND=compiled but the extension is not built; "
                "run `python setup.py build_ext --inplace`"
            )
if _impl is None:
    _impl = pykernel

Kernel = _impl.Kernel
BACKEND = _impl.BACKEND


def make_kernel(canvas):
    """Kernel over the canvas's current pools (a quiescent snapshot)."""
    return Kernel.for_canvas(canvas)


def get_kernel_class(backend: str):
    """Explicit backend access, used by tests and the benchmark."""
    if backend == "python":
        return pykernel.Kernel
    if backend == "compiled":
        from . import ckernel

        return ckernel.Kernel
    raise ValueError(f"unknown backend {backend!r}")


def available_backends():
    out = ["python"]
    try:
        from . import ckernel  # noqa: F401

        out.insert(0, "compiled")
    except ImportError:
        pass
    return out
