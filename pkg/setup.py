import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize

    USE_CYTHON = True
except ImportError:
    USE_CYTHON = False

import numpy as np

CYTHON_OPTIONS = {
    "boundscheck": False,
    "wraparound": False,
    "cdivision": True,
    "language_level": 3,
}


class OptionalBuildExt(build_ext):
    """Build the kernels if possible; the package falls back to numpy otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: skipping compiled kernels ({exc})")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc})")


def _extensions():
    if os.environ.get("FFD_NO_EXT"):
        return []
    src = "src/ffd/_kernels.pyx" if USE_CYTHON else "src/ffd/_kernels.c"
    if not os.path.exists(src):
        return []
    ext = Extension(
        "ffd._kernels",
        [src],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    if USE_CYTHON:
        return cythonize([ext], compiler_directives=CYTHON_OPTIONS)
    return [ext]


setup(ext_modules=_extensions(), cmdclass={"build_ext": OptionalBuildExt})
