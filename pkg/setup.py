"""Build script: compiles the optional fast kernels.

The package works without the compiled extension (a pure-Python fallback is
selected at import time), so a missing compiler or Cython only downgrades
performance. Set MSTDYN_REQUIRE_EXT=1 to turn a failed extension build into
a hard error.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

REQUIRE_EXT = os.environ.get("MSTDYN_REQUIRE_EXT", "") not in ("", "0")


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        if REQUIRE_EXT:
            raise
        return []
    ext = Extension(
        "mstdyn._kernels._fast",
        ["src/mstdyn/_kernels/_fast.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


class OptionalBuildExt(build_ext):
    """build_ext that degrades to the pure-Python fallback on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            if REQUIRE_EXT:
                raise
            print(f"warning: skipping compiled kernels ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            if REQUIRE_EXT:
                raise
            print(f"warning: could not build {ext.name} ({exc})", file=sys.stderr)


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
