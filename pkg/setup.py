"""Build the optional Cython kernels.

If Cython or a C compiler is unavailable the package still installs and
falls back to the numpy kernels in ``unilearn._pykernels``.
"""
import os

import numpy as np
from setuptools import setup

ext_modules = []
if not os.environ.get("UNILEARN_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "unilearn._ckernels",
            ["src/unilearn/_ckernels.pyx"],
            include_dirs=[np.get_include()],
            # no FMA contraction: results must match the numpy fallback bit for bit
            extra_compile_args=["-O2", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
