"""Build script for the optional compiled simulation core.

The package works without the extension (a pure-Python event loop is
selected at import time), so a failed compile only costs speed.
"""

import os

from setuptools import Extension, setup

PYX = "src/packsim/_backend/_core.pyx"

ext_modules = []
if os.path.exists(PYX):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "packsim._backend._core",
                    [PYX],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
