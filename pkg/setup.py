"""Build the compiled traversal kernel.

The ray-traversal inner loop is compiled from Cython when available; the
package falls back to a pure-Python kernel otherwise, so the extension is
strictly optional.  Build in place with:

    python setup.py build_ext --inplace

`-ffp-contract=off` matters: the error model assumes one IEEE rounding per
floating-point operation, and fused multiply-adds would silently change the
single-precision results relative to the pure-Python kernel.
"""

import os

from setuptools import setup

PYX = "src/canvox/_kernel/ckernel.pyx"

extensions = []
if os.path.exists(PYX):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        extensions = cythonize(
            [
                Extension(
                    "canvox._kernel.ckernel",
                    [PYX],
                    extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=extensions)
