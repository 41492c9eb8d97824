"""Build script for the optional compiled envelope kernel.

The package works without the extension (a numpy fallback is selected at
import), so a failed compile only costs speed.
"""
import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("AMPERE_LAB_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext = Extension(
            "ampere_lab._envelope",
            ["src/ampere_lab/_envelope.pyx"],
            include_dirs=[np.get_include()],
            # no contraction or fast-math: the fallback must match bit for bit
            extra_compile_args=["-O3", "-ffp-contract=off", "-fno-fast-math"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)

setup(ext_modules=ext_modules)
