"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python kernel module is
selected at import time), so a missing Cython toolchain degrades the build
to source-only instead of failing it.
"""

from setuptools import setup
from setuptools.extension import Extension

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "bcmar._kernels._core",
                sources=["src/bcmar/_kernels/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
