"""Build script for the optional compiled SMO kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile should not abort installation.
"""

import sys

from setuptools import Extension, setup


def extension_modules():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        print("cython/numpy unavailable, skipping compiled SMO kernel", file=sys.stderr)
        return []
    ext = Extension(
        "kneesound._smo",
        sources=["src/kneesound/_smo.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extension_modules())
