"""Build script: compiles the optional sketch kernel extension.

If Cython or a C compiler is unavailable the package still installs;
`pdfastream._kernel` falls back to the pure-Python backend at import time.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("PDFASTREAM_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "pdfastream._kernel._cms",
                    ["src/pdfastream/_kernel/_cms.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
