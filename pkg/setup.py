"""Build the optional Cython range-coder kernel.

The package works without it: ``lfinr.codec.entropy`` falls back to the
pure-Python coder when the extension cannot be imported.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("LFINR_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "lfinr.codec._rangecoder",
                    ["src/lfinr/codec/_rangecoder.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
