import os

import numpy
from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("AMBIENTFLOW_PURE"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "ambientflow._kernels._core",
                    ["src/ambientflow/_kernels/_core.pyx"],
                    extra_compile_args=["-O3"],
                    include_dirs=[numpy.get_include()],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # no Cython: the package falls back to the numpy backend at import
        ext_modules = []

setup(ext_modules=ext_modules)
