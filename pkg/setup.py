"""Builds the optional compiled matched-filter kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes the Monte-Carlo hot loop
independent of BLAS threading.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "isacguard._scan",
                ["src/isacguard/_scan.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython available: install the pure-Python package only.
    pass

setup(ext_modules=ext_modules)
